#pragma once

#include "estimate.hpp"
#include "function_field.hpp"
#include "hypermetric.hpp"
#include "operators.hpp"
#include "oracle.hpp"
#include "parallel.hpp"
#include "profile.hpp"
#include "random.hpp"
#include "sampling.hpp"
#include "sections.hpp"
#include "space.hpp"
#include "config.hpp"
#include "experiments.hpp"
