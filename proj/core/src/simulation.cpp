#include "cohsync/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <functional>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>

#include "detail_random.hpp"

namespace cohsync::sim {
namespace {

using Neighbours = std::vector<std::vector<std::pair<int, double>>>;

Neighbours neighbour_lists(const graph::DirectedWeightedGraph& g) {
  const int n = g.node_count();
  Neighbours out(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && g.weight(i, j) != 0.0) out[i].push_back({j, g.weight(i, j)});
    }
  }
  return out;
}

// sum_j a_ij (v_i - v_j) over column blocks of `values`.
template <typename Block>
void diffuse(const Neighbours& nb, int i, const Block& column, Vector& out) {
  out.setZero();
  for (const auto& [j, w] : nb[i]) out.noalias() += w * (column(i) - column(j));
}

Matrix diffuse_all(const graph::DirectedWeightedGraph& g, const Matrix& values, const char* what) {
  if (values.cols() != g.node_count()) {
    throw std::invalid_argument(std::string(what) + ": expected one column per agent");
  }
  const Neighbours nb = neighbour_lists(g);
  Matrix out(values.rows(), values.cols());
  Vector acc(values.rows());
  for (int i = 0; i < g.node_count(); ++i) {
    diffuse(nb, i, [&](int k) { return values.col(k); }, acc);
    out.col(i) = acc;
  }
  return out;
}

// Runs fn(begin, end) over contiguous agent ranges on a fixed set of workers.
class WorkerPool {
 public:
  explicit WorkerPool(int threads) : threads_(std::max(1, threads)) {
    for (int w = 1; w < threads_; ++w) workers_.emplace_back([this, w] { loop(w); });
  }
  ~WorkerPool() {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
      ++generation_;
    }
    wake_.notify_all();
    for (auto& t : workers_) t.join();
  }
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  void run(int count, const std::function<void(int, int)>& fn) {
    if (threads_ == 1) {
      fn(0, count);
      return;
    }
    {
      std::lock_guard lock(mutex_);
      task_ = &fn;
      count_ = count;
      pending_ = threads_ - 1;
      error_ = nullptr;
      ++generation_;
    }
    wake_.notify_all();
    std::exception_ptr own;
    try {
      const auto [b, e] = range(0, count);
      fn(b, e);
    } catch (...) {
      own = std::current_exception();
    }
    std::unique_lock lock(mutex_);
    done_.wait(lock, [this] { return pending_ == 0; });
    task_ = nullptr;
    if (own) std::rethrow_exception(own);
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::pair<int, int> range(int worker, int count) const {
    const int chunk = (count + threads_ - 1) / threads_;
    const int b = std::min(count, worker * chunk);
    return {b, std::min(count, b + chunk)};
  }

  void loop(int worker) {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(int, int)>* task = nullptr;
      int count = 0;
      {
        std::unique_lock lock(mutex_);
        wake_.wait(lock, [&] { return generation_ != seen; });
        seen = generation_;
        if (stop_) return;
        task = task_;
        count = count_;
      }
      std::exception_ptr err;
      try {
        const auto [b, e] = range(worker, count);
        (*task)(b, e);
      } catch (...) {
        err = std::current_exception();
      }
      {
        std::lock_guard lock(mutex_);
        if (err && !error_) error_ = err;
        --pending_;
      }
      done_.notify_one();
    }
  }

  int threads_;
  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(int, int)>* task_ = nullptr;
  int count_ = 0;
  int pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

struct AgentAux {
  Vector u;
  Vector zeta;
  double proxy = 0.0;
  double output_proxy = 0.0;
};

class Network {
 public:
  explicit Network(const SimConfig& config)
      : config_(config),
        model_(config.model),
        nb_(neighbour_lists(config.graph)),
        agents_(config.graph.node_count()),
        collaborative_(std::holds_alternative<protocol::CollabDesign>(config.design)),
        n_(model_.n()),
        p_(model_.p()),
        m_(model_.m()),
        labels_(config.agent_labels) {
    if (collaborative_) {
      protocol_dim_ = n_;
    } else {
      const auto& d = std::get<protocol::NoncollabDesign>(config.design);
      protocol_dim_ = d.n1();
      if (d.n() != n_ || d.p() != p_ || d.m() != m_) {
        throw std::invalid_argument("simulate: design does not match the model");
      }
    }
    if (collaborative_) {
      const auto& d = std::get<protocol::CollabDesign>(config.design);
      if (d.n() != n_ || d.p() != p_ || d.m() != m_) {
        throw std::invalid_argument("simulate: design does not match the model");
      }
    }
    block_ = n_ + protocol_dim_ + (collaborative_ ? 2 : 1);
    if (labels_.empty()) {
      for (int i = 0; i < agents_; ++i) labels_.push_back(i + 1);
    }
    if (static_cast<int>(labels_.size()) != agents_) {
      throw std::invalid_argument("simulate: agent_labels must have one entry per agent");
    }
    aux_.resize(agents_);
    outputs_.resize(p_, agents_);
  }

  int agents() const { return agents_; }
  int block() const { return block_; }
  int protocol_dim() const { return protocol_dim_; }
  bool collaborative() const { return collaborative_; }
  const std::vector<AgentAux>& aux() const { return aux_; }

  Vector initial_state() const {
    Matrix x0 = config_.x0 ? *config_.x0 : initial_states(n_, agents_, config_.seed);
    if (x0.rows() != n_ || x0.cols() != agents_) {
      throw std::invalid_argument("simulate: x0 must be n x N");
    }
    Vector state = Vector::Zero(static_cast<Eigen::Index>(block_) * agents_);
    for (int i = 0; i < agents_; ++i) {
      state.segment(i * block_, n_) = x0.col(i);
      state(i * block_ + n_ + protocol_dim_) = config_.rho0;
      if (collaborative_) state(i * block_ + n_ + protocol_dim_ + 1) = config_.alpha0;
    }
    return state;
  }

  // Fills deriv and the per-agent aux record for state at time t.
  void evaluate(double t, const Vector& state, Vector& deriv, WorkerPool& pool) {
    for (int i = 0; i < agents_; ++i) {
      outputs_.col(i) = model_.C * state.segment(i * block_, n_);
    }
    pool.run(agents_, [&](int begin, int end) {
      Vector zeta(p_);
      Vector zeta_tilde(n_);
      for (int i = begin; i < end; ++i) agent_rates(i, t, state, deriv, zeta, zeta_tilde);
    });
  }

 private:
  void agent_rates(int i, double t, const Vector& state, Vector& deriv, Vector& zeta,
                   Vector& zeta_tilde) {
    const auto base = static_cast<Eigen::Index>(i) * block_;
    diffuse(nb_, i, [&](int k) { return outputs_.col(k); }, zeta);
    const Vector x = state.segment(base, n_);
    const Vector proto = state.segment(base + n_, protocol_dim_);
    const double rho = state(base + n_ + protocol_dim_);
    AgentAux& aux = aux_[i];
    aux.zeta = zeta;
    Vector dproto;
    double drho = 0.0;
    if (collaborative_) {
      const auto& design = std::get<protocol::CollabDesign>(config_.design);
      diffuse(nb_, i, [&](int k) { return state.segment(k * block_ + n_, n_); }, zeta_tilde);
      const double alpha = state(base + n_ + protocol_dim_ + 1);
      auto rates = protocol::collab_derivatives(design, proto, rho, alpha, zeta, zeta_tilde);
      dproto = std::move(rates.dx_hat);
      drho = rates.drho;
      deriv(base + n_ + protocol_dim_ + 1) = rates.dalpha;
      aux.u = std::move(rates.u);
      aux.proxy = rates.observer_proxy;
      aux.output_proxy = rates.output_proxy;
    } else {
      const auto& design = std::get<protocol::NoncollabDesign>(config_.design);
      auto rates = protocol::noncollab_derivatives(design, proto, rho, zeta);
      dproto = std::move(rates.dxi1_hat);
      drho = rates.drho;
      aux.u = std::move(rates.u);
      aux.proxy = rates.proxy;
    }
    Vector dx = model_.A * x + model_.B * aux.u;
    if (model_.w() > 0) {
      dx.noalias() += model_.E * disturbance_value(config_.disturbance, labels_[i], t, model_.w());
    }
    deriv.segment(base, n_) = dx;
    deriv.segment(base + n_, protocol_dim_) = dproto;
    deriv(base + n_ + protocol_dim_) = drho;
  }

  const SimConfig& config_;
  const model::AgentModel& model_;
  Neighbours nb_;
  int agents_;
  bool collaborative_;
  int n_;
  int p_;
  int m_;
  int protocol_dim_ = 0;
  int block_ = 0;
  std::vector<int> labels_;
  std::vector<AgentAux> aux_;
  Matrix outputs_;
};

void record(SimulationRun& run, double t, const Vector& state, const Network& net,
            const model::AgentModel& model) {
  run.t.push_back(t);
  const int block = net.block();
  for (int i = 0; i < net.agents(); ++i) {
    const auto base = static_cast<Eigen::Index>(i) * block;
    const Vector x = state.segment(base, run.n);
    const Vector y = model.C * x;
    const AgentAux& aux = net.aux()[i];
    run.x.insert(run.x.end(), x.data(), x.data() + x.size());
    run.y.insert(run.y.end(), y.data(), y.data() + y.size());
    run.u.insert(run.u.end(), aux.u.data(), aux.u.data() + aux.u.size());
    run.zeta.insert(run.zeta.end(), aux.zeta.data(), aux.zeta.data() + aux.zeta.size());
    for (int k = 0; k < run.protocol_dim; ++k) run.protocol_state.push_back(state(base + run.n + k));
    run.coherency_norm.push_back(aux.zeta.norm());
    run.coherency_proxy.push_back(aux.proxy);
    run.rho.push_back(state(base + run.n + run.protocol_dim));
    if (run.collaborative) {
      run.alpha.push_back(state(base + run.n + run.protocol_dim + 1));
      run.output_proxy.push_back(aux.output_proxy);
    }
  }
}

}  // namespace

Vector disturbance_value(const DisturbanceSpec& spec, int agent, double t, int channels) {
  if (agent < 1) throw std::invalid_argument("disturbance_value: agent index is 1-based");
  if (channels < 0) throw std::invalid_argument("disturbance_value: negative channel count");
  const double i = agent;
  switch (spec.kind) {
    case DisturbanceKind::chirp:
      return Vector::Constant(channels, std::sin(0.1 * i * t + 0.01 * t * t));
    case DisturbanceKind::sawtooth:
      // nearbyint follows the default rounding mode: half to even.
      return Vector::Constant(channels, i * t - std::nearbyint(i * t));
    case DisturbanceKind::zero:
      return Vector::Zero(channels);
    case DisturbanceKind::table:
      break;
  }
  const auto& ts = spec.table_times;
  if (ts.empty() || spec.table_values.rows() != static_cast<Eigen::Index>(ts.size()) ||
      spec.table_values.cols() != channels) {
    throw std::invalid_argument("disturbance_value: table shape does not match");
  }
  if (t < ts.front() || t > ts.back()) {
    throw std::out_of_range("disturbance_value: t = " + std::to_string(t) +
                            " lies outside the table");
  }
  const auto it = std::upper_bound(ts.begin(), ts.end(), t);
  if (it == ts.end()) return spec.table_values.row(ts.size() - 1).transpose();
  const auto k = static_cast<Eigen::Index>(it - ts.begin());
  const double t0 = ts[k - 1];
  const double t1 = ts[k];
  const double s = (t - t0) / (t1 - t0);
  return ((1.0 - s) * spec.table_values.row(k - 1) + s * spec.table_values.row(k)).transpose();
}

Matrix network_signals(const graph::DirectedWeightedGraph& g, const Matrix& outputs) {
  return diffuse_all(g, outputs, "network_signals");
}

Matrix protocol_exchange(const graph::DirectedWeightedGraph& g, const Matrix& protocol_states) {
  return diffuse_all(g, protocol_states, "protocol_exchange");
}

Matrix initial_states(int n, int agents, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  Matrix out(n, agents);
  for (int i = 0; i < agents; ++i) {
    for (int k = 0; k < n; ++k) out(k, i) = detail::uniform_symmetric(engine);
  }
  return out;
}

std::vector<double> SimulationRun::agent_series(const std::vector<double>& series,
                                                int agent) const {
  std::vector<double> out(samples());
  for (std::size_t s = 0; s < samples(); ++s) out[s] = at(series, s, agent);
  return out;
}

SimulationRun simulate(const SimConfig& config) {
  config.model.validate();
  if (!(config.dt > 0.0) || !(config.t_end >= config.dt) || config.stride < 1) {
    throw std::invalid_argument("simulate: need dt > 0, t_end >= dt and stride >= 1");
  }
  if (config.graph.node_count() < 1) throw std::invalid_argument("simulate: empty graph");
  Network net(config);
  WorkerPool pool(std::min(config.threads, net.agents()));

  SimulationRun run;
  run.collaborative = net.collaborative();
  run.N = net.agents();
  run.n = config.model.n();
  run.p = config.model.p();
  run.m = config.model.m();
  run.protocol_dim = net.protocol_dim();

  const auto steps = static_cast<long long>(std::ceil(config.t_end / config.dt - 1e-9));
  const double dt = config.dt;
  Vector state = net.initial_state();
  const auto size = state.size();
  Vector k1(size), k2(size), k3(size), k4(size), probe(size);

  for (long long step = 0; step <= steps; ++step) {
    const double t = static_cast<double>(step) * dt;
    net.evaluate(t, state, k1, pool);
    if (step % config.stride == 0 || step == steps) record(run, t, state, net, config.model);
    if (step == steps) break;

    probe = state + (0.5 * dt) * k1;
    net.evaluate(t + 0.5 * dt, probe, k2, pool);
    probe = state + (0.5 * dt) * k2;
    net.evaluate(t + 0.5 * dt, probe, k3, pool);
    probe = state + dt * k3;
    net.evaluate(t + dt, probe, k4, pool);

    const double before = state.lpNorm<Eigen::Infinity>();
    state += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!state.allFinite()) {
      throw SimulationError("simulate: non-finite state at t = " + std::to_string(t + dt));
    }
    const double after = state.lpNorm<Eigen::Infinity>();
    if (after > 1e3 * std::max(before, 1.0)) {
      throw SimulationError("simulate: state grew more than 1000x in one step at t = " +
                            std::to_string(t + dt) + "; dt is too large");
    }
  }
  return run;
}

std::optional<double> detect_settling(const std::vector<double>& times,
                                      const std::vector<double>& values, double threshold,
                                      double trailing_window) {
  if (times.size() != values.size() || times.empty()) {
    throw std::invalid_argument("detect_settling: times and values must be nonempty and aligned");
  }
  if (trailing_window > times.back() - times.front()) {
    throw std::invalid_argument("detect_settling: trailing window longer than the run");
  }
  std::size_t k = values.size();
  while (k > 0 && values[k - 1] <= threshold) --k;
  if (k == values.size()) return std::nullopt;
  const double t_settle = times[k];
  if (times.back() - t_settle < trailing_window) return std::nullopt;
  return t_settle;
}

void write_trajectory_csv(std::ostream& out, const SimulationRun& run) {
  std::string header = "t,agent";
  for (int k = 1; k <= run.p; ++k) header += ",y" + std::to_string(k);
  header += ",coherency_norm,coherency_proxy,rho";
  if (run.collaborative) header += ",alpha";
  for (int k = 1; k <= run.m; ++k) header += ",u" + std::to_string(k);
  if (run.collaborative) header += ",output_proxy";
  out << header << '\n';

  char buf[32];
  std::string line;
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    line += ',';
    line += buf;
  };
  for (std::size_t s = 0; s < run.samples(); ++s) {
    for (int i = 0; i < run.N; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", run.t[s]);
      line = buf;
      line += ',' + std::to_string(i + 1);
      for (int k = 0; k < run.p; ++k) put(run.at(run.y, s, i, run.p, k));
      put(run.at(run.coherency_norm, s, i));
      put(run.at(run.coherency_proxy, s, i));
      put(run.at(run.rho, s, i));
      if (run.collaborative) put(run.at(run.alpha, s, i));
      for (int k = 0; k < run.m; ++k) put(run.at(run.u, s, i, run.m, k));
      if (run.collaborative) put(run.at(run.output_proxy, s, i));
      line += '\n';
      out << line;
    }
  }
}

}  // namespace cohsync::sim
