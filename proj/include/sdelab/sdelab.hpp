#pragma once

#include "sdelab/rng.hpp"
#include "sdelab/sde_model.hpp"
#include "sdelab/brownian_oracle.hpp"
#include "sdelab/schemes.hpp"
#include "sdelab/method_framework.hpp"
#include "sdelab/prob_tools.hpp"
#include "sdelab/proof_lab.hpp"
#include "sdelab/localization_lab.hpp"
#include "sdelab/error_lab.hpp"
