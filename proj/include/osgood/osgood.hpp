#pragma once

#include "osgood/bounds.hpp"
#include "osgood/crossings.hpp"
#include "osgood/estimators.hpp"
#include "osgood/field.hpp"
#include "osgood/integrator.hpp"
#include "osgood/io.hpp"
#include "osgood/modulus.hpp"
#include "osgood/parse.hpp"
#include "osgood/quadrature.hpp"
