#pragma once

#include "qdid/data_model.hpp"
#include "qdid/empirical.hpp"
#include "qdid/estimators.hpp"
#include "qdid/inference.hpp"
#include "qdid/io.hpp"
#include "qdid/report.hpp"
#include "qdid/rng.hpp"
#include "qdid/simulation.hpp"
