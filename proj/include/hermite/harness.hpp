#pragma once
#include "harness/config.hpp"
#include "harness/emit.hpp"
#include "harness/study.hpp"
#include "harness/test_function.hpp"
