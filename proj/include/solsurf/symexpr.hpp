#pragma once

#include "solsurf/symexpr/algebra.hpp"
#include "solsurf/symexpr/calculus.hpp"
#include "solsurf/symexpr/eval.hpp"
#include "solsurf/symexpr/expr.hpp"
#include "solsurf/symexpr/parse.hpp"
