#pragma once
// Umbrella header for the provenance engine.

#include "errors.hpp"
#include "ids.hpp"
#include "digest.hpp"
#include "nodes.hpp"
#include "manifest.hpp"
#include "storage.hpp"
#include "store.hpp"
#include "dump.hpp"
#include "git_ingest.hpp"
#include "isochrone.hpp"
#include "models.hpp"
#include "corpus_gen.hpp"
#include "analytics.hpp"
