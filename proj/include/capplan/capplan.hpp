#pragma once

#include "capplan/errors.hpp"
#include "capplan/network.hpp"
#include "capplan/io.hpp"
#include "capplan/power_flow.hpp"
#include "capplan/sensitivity.hpp"
#include "capplan/pso.hpp"
#include "capplan/placement.hpp"
#include "capplan/report.hpp"
#include "capplan/config.hpp"
