#include "cohsync/reference_models.hpp"

namespace cohsync::reference {

model::AgentModel noncollab_model() {
  model::AgentModel m;
  m.A.resize(4, 4);
  m.A << 0, 1, 1, 0,
        -1, 0, 1, 0,
         0, 0, 0, 1,
         0, 0, 0, -2;
  m.B.resize(4, 1);
  m.B << 0, 1, 0, 1;
  m.E = m.B;
  m.C.resize(2, 4);
  m.C << 1, 0, 0, 0,
         0, 1, 0, 0;
  return m;
}

protocol::NoncollabOverrides noncollab_published_overrides() {
  protocol::NoncollabOverrides o;
  Matrix s(4, 4);
  s << 1, 0, 0, 0,
       0, 1, 0, -1,
       0, 0, 1, 0,
       0, 1, 0, 0;
  o.S = s;
  o.T = Matrix::Identity(2, 2);
  Matrix h1(3, 1);
  h1 << -1, 0, -1;
  o.H1 = h1;
  return o;
}

model::AgentModel collab_model() {
  model::AgentModel m;
  m.A.resize(3, 3);
  m.A << -1, 1, 0,
          0, -2, 1,
          0, 0, -3;
  m.B = Matrix::Ones(3, 1);
  m.E.resize(3, 1);
  m.E << 1, 0, 1;
  m.C.resize(1, 3);
  m.C << 1, 0, 1;
  return m;
}

model::AgentModel double_integrator() {
  model::AgentModel m;
  m.A.resize(2, 2);
  m.A << 0, 1,
         0, 0;
  m.B.resize(2, 1);
  m.B << 0, 1;
  m.C.resize(1, 2);
  m.C << 1, 0;
  m.E = m.B;
  return m;
}

model::AgentModel scalar_integrator() {
  return {Matrix::Zero(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1)};
}

}  // namespace cohsync::reference
