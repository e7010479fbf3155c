#pragma once

#include "clairaut/clairaut_pde.hpp"
#include "clairaut/differentiate.hpp"
#include "clairaut/dynamics.hpp"
#include "clairaut/errors.hpp"
#include "clairaut/evaluate.hpp"
#include "clairaut/expr.hpp"
#include "clairaut/gauge.hpp"
#include "clairaut/io.hpp"
#include "clairaut/legendre.hpp"
#include "clairaut/manytime.hpp"
#include "clairaut/model.hpp"
#include "clairaut/parser.hpp"
#include "clairaut/simplify.hpp"
#include "clairaut/verify.hpp"
