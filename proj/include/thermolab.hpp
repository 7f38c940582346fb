#pragma once

#include "thermolab/spectral.hpp"
#include "thermolab/field.hpp"
#include "thermolab/surface.hpp"
#include "thermolab/circle_bundle.hpp"
#include "thermolab/thermostat.hpp"
#include "thermolab/transport_weyl.hpp"
#include "thermolab/pestov.hpp"
#include "thermolab/expression.hpp"
#include "thermolab/field_io.hpp"
#include "thermolab/scenario.hpp"
