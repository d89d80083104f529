#ifndef SPLITGATE_SPLITGATE_HPP
#define SPLITGATE_SPLITGATE_HPP

#include "splitgate/digest.hpp"
#include "splitgate/dhash.hpp"
#include "splitgate/error.hpp"
#include "splitgate/hashdup.hpp"
#include "splitgate/image.hpp"
#include "splitgate/ingest.hpp"
#include "splitgate/json_io.hpp"
#include "splitgate/leakstats.hpp"
#include "splitgate/metrics.hpp"
#include "splitgate/parallel.hpp"
#include "splitgate/presets.hpp"
#include "splitgate/rng.hpp"
#include "splitgate/splitter.hpp"
#include "splitgate/synthbench.hpp"

#endif // SPLITGATE_SPLITGATE_HPP
