#pragma once

#include "ckf/bench.hpp"
#include "ckf/diagnostics.hpp"
#include "ckf/errors.hpp"
#include "ckf/filters.hpp"
#include "ckf/likelihood.hpp"
#include "ckf/linalg.hpp"
#include "ckf/model.hpp"
#include "ckf/step_likelihood.hpp"
#include "ckf/truncnorm.hpp"
