#pragma once

#include "alcurve/classifier.hpp"
#include "alcurve/config.hpp"
#include "alcurve/errors.hpp"
#include "alcurve/graph.hpp"
#include "alcurve/graph_io.hpp"
#include "alcurve/harness.hpp"
#include "alcurve/propagation.hpp"
#include "alcurve/query.hpp"
#include "alcurve/reconstruction.hpp"
#include "alcurve/session.hpp"
#include "alcurve/synthetic.hpp"
