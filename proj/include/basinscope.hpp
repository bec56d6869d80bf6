#pragma once

// Library umbrella. The command-line front end lives in basinscope/cli.hpp.

#include "basinscope/basin.hpp"
#include "basinscope/bifurcation.hpp"
#include "basinscope/box.hpp"
#include "basinscope/equilibria.hpp"
#include "basinscope/errors.hpp"
#include "basinscope/expr.hpp"
#include "basinscope/format.hpp"
#include "basinscope/integrate.hpp"
#include "basinscope/kicks.hpp"
#include "basinscope/linalg.hpp"
#include "basinscope/model.hpp"
#include "basinscope/parallel.hpp"
#include "basinscope/table.hpp"
