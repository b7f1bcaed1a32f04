#pragma once

#include "xpid/error.hpp"
#include "xpid/model.hpp"
#include "xpid/design.hpp"
#include "xpid/jacobi.hpp"
#include "xpid/certificate.hpp"
#include "xpid/polynomial.hpp"
#include "xpid/rng.hpp"
#include "xpid/simulate.hpp"
#include "xpid/diagnostics.hpp"
#include "xpid/expr.hpp"
#include "xpid/plants.hpp"
#include "xpid/config.hpp"
#include "xpid/report.hpp"
#include "xpid/jobs.hpp"
