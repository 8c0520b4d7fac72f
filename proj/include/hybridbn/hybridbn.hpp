#pragma once

#include "hybridbn/canonical.hpp"
#include "hybridbn/cdinsert.hpp"
#include "hybridbn/cliquetree.hpp"
#include "hybridbn/engine.hpp"
#include "hybridbn/errors.hpp"
#include "hybridbn/experiments.hpp"
#include "hybridbn/hybrid_factor.hpp"
#include "hybridbn/io.hpp"
#include "hybridbn/kl.hpp"
#include "hybridbn/lw.hpp"
#include "hybridbn/model.hpp"
#include "hybridbn/numeric.hpp"
#include "hybridbn/propagation.hpp"
#include "hybridbn/quadrature.hpp"
