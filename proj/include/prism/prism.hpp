#pragma once
// Umbrella header for the prism library.

#include "prism/errors.hpp"
#include "prism/exploration.hpp"
#include "prism/expert_panel.hpp"
#include "prism/graph.hpp"
#include "prism/harness.hpp"
#include "prism/http_providers.hpp"
#include "prism/metrics.hpp"
#include "prism/mock_providers.hpp"
#include "prism/persistence.hpp"
#include "prism/providers.hpp"
#include "prism/synthesis.hpp"
