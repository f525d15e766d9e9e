#pragma once

// The agent models used by the bundled experiments, plus the small closed-form
// systems the property checks lean on.

#include "cohsync/agent_model.hpp"
#include "cohsync/noncollab.hpp"

namespace cohsync::reference {

/// Four-state relative-degree-one model with two outputs and matched disturbance.
model::AgentModel noncollab_model();

/// S, T and H1 published with the noncollaborative model.
protocol::NoncollabOverrides noncollab_published_overrides();

/// Three-state single-output model used with the collaborative protocol.
model::AgentModel collab_model();

/// x1' = x2, x2' = u, y = x1.
model::AgentModel double_integrator();

/// x' = u + w, y = x.
model::AgentModel scalar_integrator();

}  // namespace cohsync::reference
