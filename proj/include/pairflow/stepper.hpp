#pragma once

namespace pairflow {

enum class Stepper { euler, rk4 };

}  // namespace pairflow
