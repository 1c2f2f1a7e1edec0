#pragma once

#include "repsel/common.hpp"
#include "repsel/config.hpp"
#include "repsel/coreset.hpp"
#include "repsel/cscore.hpp"
#include "repsel/dataset.hpp"
#include "repsel/dimred.hpp"
#include "repsel/eval.hpp"
#include "repsel/index.hpp"
#include "repsel/pipeline.hpp"
#include "repsel/probe.hpp"
#include "repsel/selection.hpp"
#include "repsel/subset.hpp"
