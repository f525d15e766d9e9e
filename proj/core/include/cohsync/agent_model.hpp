#pragma once

// Agent model (A, B, C, E), structural assumption checks, invariant zeros and
// the (S, T) output transformation used by the noncollaborative design.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cohsync/linalg.hpp"

namespace cohsync::model {

/// x' = A x + B u + E w,  y = C x.
struct AgentModel {
  Matrix A;
  Matrix B;
  Matrix C;
  Matrix E;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  int p() const { return static_cast<int>(C.rows()); }
  int w() const { return static_cast<int>(E.cols()); }

  /// Throws std::invalid_argument on inconsistent dimensions, non-finite
  /// entries or rank-deficient B / C.
  void validate() const;
};

/// A design precondition that the model does not meet. `assumption` names
/// it, e.g. "minimum-phase".
class AssumptionError : public std::runtime_error {
 public:
  AssumptionError(std::string assumption, const std::string& detail)
      : std::runtime_error("assumption violated: " + assumption + " (" + detail + ")"),
        assumption_(std::move(assumption)) {}
  const std::string& assumption() const { return assumption_; }

 private:
  std::string assumption_;
};

enum class TriState { no, yes, undetermined };

const char* to_string(TriState value);

struct AssumptionReport {
  bool stabilizable = false;
  bool detectable = false;
  bool observable = false;
  bool image_E_in_image_B = false;
  bool relative_degree_one = false;
  bool left_invertible = false;
  bool right_invertible = false;
  bool minimum_phase = false;
  TriState uniform_rank = TriState::undetermined;
  std::vector<Complex> invariant_zeros;
  /// Some rank decision had a singular value within the grey band.
  bool rank_ambiguous = false;

  /// First failing item of the noncollaborative requirements, if any.
  std::optional<std::string> noncollab_failure() const;
  /// First failing item of the collaborative requirements (including
  /// uniform rank), if any.
  std::optional<std::string> collab_failure() const;
};

AssumptionReport check_assumptions(const AgentModel& model);

/// Finite invariant zeros of (A, B, C), sorted. Empty when the system matrix
/// is degenerate (neither left nor right invertible).
std::vector<Complex> invariant_zeros(const AgentModel& model);

/// x~ = S x splits into (x1, x2) with sizes (n1, m) = (n - m, m).
struct OutputTransform {
  Matrix S;
  Matrix T;
  Matrix S_inv;
  int n1 = 0;
  int m = 0;
  Matrix A11, A12, A21, A22;
  Matrix B2;
  Matrix C1;
  Matrix E2;
  Matrix A_tilde, B_tilde, C_tilde, E_tilde;
};

/// Builds S = [N; T2 C], T = [T1; T2] with N spanning the left null space of
/// B, T2 = (CB)^+ and T1 spanning the left null space of CB, so that B2 = I.
/// Supplied S or T replace the constructed ones after validation.
OutputTransform build_output_transform(const AgentModel& model,
                                       const std::optional<Matrix>& s_override = {},
                                       const std::optional<Matrix>& t_override = {});

/// Zeros read off the transformed coordinates: the unobservable modes of
/// (C1, A11). With m = p this is the whole spectrum of A11.
std::vector<Complex> zeros_from_transform(const OutputTransform& transform);

/// H1 = -Y C1^T with Y the stabilizing solution of
/// A11 Y + Y A11^T - Y C1^T C1 Y + I = 0, so A11 + H1 C1 is Hurwitz.
Matrix design_observer_gain(const Matrix& a11, const Matrix& c1);

}  // namespace cohsync::model
