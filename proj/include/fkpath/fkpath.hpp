#pragma once

#include "core.hpp"
#include "rng.hpp"
#include "parallel.hpp"
#include "wiener.hpp"
#include "transform.hpp"
#include "integrate.hpp"
#include "kernels.hpp"
#include "feynmankac.hpp"
#include "lattice.hpp"
#include "spde.hpp"
