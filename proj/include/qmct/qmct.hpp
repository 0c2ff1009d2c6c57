#pragma once

#include "qmct/analysis.hpp"
#include "qmct/contrasts.hpp"
#include "qmct/covariance.hpp"
#include "qmct/critvals.hpp"
#include "qmct/csv.hpp"
#include "qmct/distributions.hpp"
#include "qmct/errors.hpp"
#include "qmct/inference.hpp"
#include "qmct/oracles.hpp"
#include "qmct/parallel.hpp"
#include "qmct/quantile.hpp"
#include "qmct/report.hpp"
#include "qmct/rng.hpp"
#include "qmct/simlab.hpp"
#include "qmct/special.hpp"
#include "qmct/study.hpp"
