#pragma once

#include "cla/aggregator.hpp"
#include "cla/connective.hpp"
#include "cla/continuity.hpp"
#include "cla/density.hpp"
#include "cla/error.hpp"
#include "cla/eval.hpp"
#include "cla/formula.hpp"
#include "cla/harness.hpp"
#include "cla/inference.hpp"
#include "cla/integrate.hpp"
#include "cla/io.hpp"
#include "cla/normalize.hpp"
#include "cla/parallel.hpp"
#include "cla/parser.hpp"
#include "cla/pattern.hpp"
#include "cla/random.hpp"
#include "cla/signature.hpp"
#include "cla/structure.hpp"
#include "cla/tabulated.hpp"
