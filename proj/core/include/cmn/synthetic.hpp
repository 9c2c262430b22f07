#pragma once

#include "cmn/params.hpp"

namespace cmn {

// Seven binary variables: a clique on X1..X4, the triangle X3 X4 X5 and the
// triangle X5 X6 X7, with five edge contexts
//   C(1,2) = {X3=1,X4=0}, C(1,3) = {X2=1}, C(4,5) = {X3=0},
//   C(5,7) = {X6=0},      C(6,7) = {X5=1}.
// Nodes are 0-based in the returned structure.
ContextualStructure reference_structure();

// Log-linear parameters on reference_structure() satisfying every context
// restriction exactly. Main effects are tuned so each marginal is close to
// 1/2, which keeps all eleven edges visible at a few thousand rows.
LogLinearModel reference_generator();

}  // namespace cmn
