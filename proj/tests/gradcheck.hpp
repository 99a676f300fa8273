#pragma once

#include "mnet/oracle.hpp"

namespace mnet::testing {

using mnet::gradcheck;
using mnet::LossFn;
using mnet::random_tensor;

}  // namespace mnet::testing
