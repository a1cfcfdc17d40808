#pragma once

#include "hubfield/airfreight.hpp"
#include "hubfield/density_io.hpp"
#include "hubfield/density_solver.hpp"
#include "hubfield/errors.hpp"
#include "hubfield/grid.hpp"
#include "hubfield/location_asymptotics.hpp"
#include "hubfield/main_hub.hpp"
#include "hubfield/mass_coupled_1d.hpp"
#include "hubfield/routing_kernel.hpp"
