#pragma once

#include "gridflow/analyzer.hpp"
#include "gridflow/case_io.hpp"
#include "gridflow/cdf.hpp"
#include "gridflow/controller.hpp"
#include "gridflow/error.hpp"
#include "gridflow/netmodel.hpp"
#include "gridflow/objective.hpp"
#include "gridflow/powerflow.hpp"
#include "gridflow/pso.hpp"
#include "gridflow/report.hpp"
