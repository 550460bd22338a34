#pragma once

#include "solsurf/symexpr.hpp"
#include "solsurf/liealg.hpp"
#include "solsurf/models.hpp"
#include "solsurf/spectral.hpp"
#include "solsurf/immersion.hpp"
#include "solsurf/geometry.hpp"
#include "solsurf/report.hpp"
