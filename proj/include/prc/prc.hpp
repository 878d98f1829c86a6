#ifndef PRC_PRC_HPP_
#define PRC_PRC_HPP_

#include "prc/common.hpp"
#include "prc/envs.hpp"
#include "prc/policy.hpp"
#include "prc/datagen.hpp"
#include "prc/nn.hpp"
#include "prc/models.hpp"
#include "prc/constrained.hpp"
#include "prc/evaluation.hpp"
#include "prc/rl.hpp"
#include "prc/experiments.hpp"

#endif  // PRC_PRC_HPP_
