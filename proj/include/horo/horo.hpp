#pragma once

#include "horo/errors.hpp"
#include "horo/problem.hpp"
#include "horo/symfunc.hpp"
#include "horo/sphere.hpp"
#include "horo/hconvex.hpp"
#include "horo/xi.hpp"
#include "horo/checks.hpp"
#include "horo/solver.hpp"
#include "horo/io.hpp"
#include "horo/cli.hpp"
