#include <algorithm>
#include <cmath>

#include "coex/verify.hpp"

namespace coex::verify {

std::optional<double> ilp_filling_bounded(const SimplicialComplex& X,
                                          const std::vector<double>& face_area,
                                          const Chain& rhs, Coeff bound) {
  const Index nf = X.simplex_count(2);
  const Index ne = X.simplex_count(1);
  if (nf > 40) throw std::runtime_error("ilp oracle limited to 40 triangles");

  // Incidence rows per face and, per edge, the last face touching it: once
  // every face of an edge is assigned its residual must vanish.
  std::vector<std::vector<std::pair<Index, Coeff>>> face_rows(nf);
  std::vector<Index> last_face(ne, -1);
  for (auto& t : X.boundary_triplets(2)) {
    face_rows[(Index)t[1]].push_back({(Index)t[0], t[2]});
    last_face[(Index)t[0]] = std::max(last_face[(Index)t[0]], (Index)t[1]);
  }
  std::vector<std::vector<Index>> closes_at(nf);
  for (Index e = 0; e < ne; ++e)
    if (last_face[e] >= 0) closes_at[last_face[e]].push_back(e);

  std::vector<Coeff> residual(ne, 0);
  for (auto& [e, c] : rhs.coeffs) residual[e] = c;

  double best = std::numeric_limits<double>::infinity();
  std::vector<Coeff> coeff(nf, 0);

  std::function<void(Index, double)> dfs = [&](Index f, double cost) {
    if (cost >= best) return;
    if (f == nf) {
      for (Index e = 0; e < ne; ++e)
        if (residual[e] != 0) return;
      best = cost;
      return;
    }
    for (Coeff c = -bound; c <= bound; ++c) {
      double ncost = cost + std::abs((double)c) * face_area[f];
      if (ncost >= best) continue;
      for (auto& [e, s] : face_rows[f]) residual[e] -= c * s;
      bool ok = true;
      for (Index e : closes_at[f])
        if (residual[e] != 0) {
          ok = false;
          break;
        }
      if (ok) {
        coeff[f] = c;
        dfs(f + 1, ncost);
      }
      for (auto& [e, s] : face_rows[f]) residual[e] += c * s;
    }
  };
  dfs(0, 0.0);
  if (!std::isfinite(best)) return std::nullopt;
  return best;
}

}  // namespace coex::verify
