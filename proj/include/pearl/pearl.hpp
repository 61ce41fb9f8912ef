#ifndef PEARL_PEARL_HPP
#define PEARL_PEARL_HPP

#include "pearl/baselines.hpp"
#include "pearl/bench.hpp"
#include "pearl/candidates.hpp"
#include "pearl/config.hpp"
#include "pearl/core.hpp"
#include "pearl/csv.hpp"
#include "pearl/downstream.hpp"
#include "pearl/eigensolver.hpp"
#include "pearl/frl.hpp"
#include "pearl/io.hpp"
#include "pearl/parallel.hpp"
#include "pearl/rng.hpp"
#include "pearl/weights.hpp"

#endif // PEARL_PEARL_HPP
