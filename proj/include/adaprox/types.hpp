#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace adaprox {

using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Which option of the update rule a run uses: plain proximal gradient (I)
// or the accelerated auxiliary-iterate update (II).
enum class Option { I, II };

inline const char* to_string(Option o) { return o == Option::I ? "I" : "II"; }

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace adaprox
