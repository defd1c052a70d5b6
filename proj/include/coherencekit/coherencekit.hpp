#pragma once

#include "annotation.hpp"
#include "backend.hpp"
#include "corpus.hpp"
#include "engine.hpp"
#include "error.hpp"
#include "metrics.hpp"
#include "report.hpp"
#include "stats.hpp"
#include "synthetic.hpp"
