#pragma once

#include "kgb/boosting.hpp"
#include "kgb/csv.hpp"
#include "kgb/data.hpp"
#include "kgb/errors.hpp"
#include "kgb/kernel_oracle.hpp"
#include "kgb/posterior.hpp"
#include "kgb/rng.hpp"
#include "kgb/serialize.hpp"
#include "kgb/synthetic.hpp"
#include "kgb/tree.hpp"
#include "kgb/uncertainty.hpp"
