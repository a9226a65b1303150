// Umbrella header.
#pragma once

#include "uqgen/config.hpp"
#include "uqgen/core.hpp"
#include "uqgen/dataset.hpp"
#include "uqgen/distance.hpp"
#include "uqgen/divergence.hpp"
#include "uqgen/errors.hpp"
#include "uqgen/eval.hpp"
#include "uqgen/generators.hpp"
#include "uqgen/judge.hpp"
#include "uqgen/remote.hpp"
#include "uqgen/report.hpp"
#include "uqgen/syntax.hpp"
#include "uqgen/text.hpp"
#include "uqgen/token_scores.hpp"
#include "uqgen/util.hpp"
