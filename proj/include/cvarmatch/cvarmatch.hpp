#pragma once

#include "cvarmatch/assignment.hpp"
#include "cvarmatch/errors.hpp"
#include "cvarmatch/estimators.hpp"
#include "cvarmatch/harness.hpp"
#include "cvarmatch/io.hpp"
#include "cvarmatch/linalg.hpp"
#include "cvarmatch/model.hpp"
#include "cvarmatch/relaxations.hpp"
#include "cvarmatch/rng.hpp"
#include "cvarmatch/theory.hpp"
