// Command-line driver: spectra, homology, fillings, Cheeger searches and
// Monte Carlo runs on the built-in models or ingested meshes, with
// machine-readable JSON/CSV reports.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "coex/filling.hpp"
#include "coex/fixtures.hpp"
#include "coex/flow.hpp"
#include "coex/models.hpp"
#include "coex/spectrum.hpp"
#include "coex/verify.hpp"

using namespace coex;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct MeshChoice {
  std::string model = "torus";  // torus | berger | cusp
  std::string mesh_file;        // OFF or JSON input instead of a model
  int n = 6;                    // torus grid
  double epsilon = 1.0;
  int refine = 1;               // berger refinement
  int s2_refine = 1, t_slices = 8, cap_layers = 2;  // cusp resolution
};

struct Loaded {
  std::shared_ptr<const SimplicialComplex> X;
  GeometrySpec geometry;
  HomologyBasis basis;
  std::optional<Chain> special_cycle;  // fiber (berger) or meridian (cusp)
  json config;
};

Loaded load(const MeshChoice& mc, bool need_basis_from_snf_if_file = true) {
  Loaded out;
  out.config = {{"model", mc.model},
                {"mesh_file", mc.mesh_file},
                {"n", mc.n},
                {"epsilon", mc.epsilon},
                {"refine", mc.refine},
                {"s2_refine", mc.s2_refine},
                {"t_slices", mc.t_slices},
                {"cap_layers", mc.cap_layers}};
  if (!mc.mesh_file.empty()) {
    std::ifstream in(mc.mesh_file);
    if (!in) throw CLI::ValidationError("--mesh", "cannot open " + mc.mesh_file);
    std::stringstream ss;
    ss << in.rdbuf();
    auto [X0, pos] = mc.mesh_file.size() > 4 && mc.mesh_file.substr(mc.mesh_file.size() - 4) == ".off"
                         ? SimplicialComplex::from_off(ss.str())
                         : SimplicialComplex::from_json(ss.str());
    // Fix the global orientation by the embedding: reorder cells whose
    // embedded determinant is negative, then rebuild.
    if (X0.dimension() == 3) {
      std::vector<std::array<Index, 4>> tets;
      for (Index t = 0; t < X0.simplex_count(3); ++t) {
        auto s4 = X0.tetrahedra()[t];
        auto P = [&](Index v) { return Eigen::Vector3d(pos[v][0], pos[v][1], pos[v][2]); };
        double det = (P(s4[1]) - P(s4[0])).cross(P(s4[2]) - P(s4[0])).dot(P(s4[3]) - P(s4[0]));
        if (det < 0) std::swap(s4[2], s4[3]);
        tets.push_back(s4);
      }
      X0 = SimplicialComplex::from_tetrahedra(X0.vertex_count(), tets);
    }
    out.X = std::make_shared<SimplicialComplex>(std::move(X0));
    out.geometry.embedding = pos;
    if (need_basis_from_snf_if_file) out.basis = homology_basis(*out.X);
    return out;
  }
  if (mc.model == "torus") {
    auto tm = models::torus_mesh(mc.n);
    out.X = tm.complex;
    out.geometry = std::move(tm.geometry);
    out.basis = std::move(tm.basis);
  } else if (mc.model == "berger") {
    auto bm = models::berger_mesh({mc.epsilon}, mc.refine);
    out.X = bm.complex;
    out.geometry = std::move(bm.geometry);
    out.basis = models::sphere_basis();
    out.special_cycle = bm.fiber_loop;
  } else if (mc.model == "cusp") {
    auto cm = models::cusp_mesh({mc.epsilon}, mc.s2_refine, mc.t_slices, mc.cap_layers);
    out.X = cm.complex;
    out.geometry = std::move(cm.geometry);
    out.basis = models::sphere_basis();
    out.special_cycle = cm.meridian;
  } else {
    throw CLI::ValidationError("--model", "unknown model " + mc.model);
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

/// Reports carry the resolved config and version; wall-clock metadata goes
/// to a side file so the main report stays byte-reproducible.
void write_report(const std::string& path, json body, const json& config) {
  body["config"] = config;
  body["version"] = kVersion;
  write_text(path, body.dump(2) + "\n");
  auto now = std::chrono::system_clock::now().time_since_epoch();
  json meta = {{"written_unix_ms",
                std::chrono::duration_cast<std::chrono::milliseconds>(now).count()}};
  write_text(path + ".meta.json", meta.dump(2) + "\n");
}

json chain_to_json(const Chain& c) {
  json entries = json::array();
  for (auto& [i, v] : c.coeffs) entries.push_back({i, v});
  return entries;
}

Chain named_cycle(const Loaded& L, const std::string& name) {
  if (name == "fiber" || name == "meridian") {
    if (!L.special_cycle) throw CLI::ValidationError("--cycle", "model has no " + name);
    return *L.special_cycle;
  }
  if (name == "square") {
    // First square-face boundary of a torus grid.
    const auto& X = *L.X;
    int n = L.config.at("n");
    auto vid = [&](int i, int j, int k) {
      return (Index)(i % n + n * (j % n) + n * n * (k % n));
    };
    Chain sq{1, {}};
    auto add = [&](Index a, Index b) { sq.add(X.edge_index(a, b), a < b ? 1 : -1); };
    add(vid(0, 0, 0), vid(1, 0, 0));
    add(vid(1, 0, 0), vid(1, 1, 0));
    add(vid(1, 1, 0), vid(0, 1, 0));
    add(vid(0, 1, 0), vid(0, 0, 0));
    return sq;
  }
  // Otherwise a JSON file holding [[edge, coeff], ...].
  std::ifstream in(name);
  if (!in) throw CLI::ValidationError("--cycle", "cannot open " + name);
  json j = json::parse(in);
  Chain c{1, {}};
  for (auto& pair : j) c.add(pair.at(0).get<Index>(), pair.at(1).get<Coeff>());
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coex: coexact 1-form spectra, filling areas and Cheeger data on triangulated 3-manifolds"};
  app.set_config("--config", "", "TOML-style config file; command line overrides");
  app.require_subcommand(1);

  MeshChoice mc;
  std::string out_path = "report.json";
  int threads = 2;
  double tol = 1e-9;
  auto add_mesh_opts = [&](CLI::App* cmd) {
    cmd->add_option("--model", mc.model, "torus | berger | cusp")->capture_default_str();
    cmd->add_option("--mesh", mc.mesh_file, "OFF or JSON mesh instead of a model");
    cmd->add_option("--n", mc.n, "torus grid size (>= 3)")->capture_default_str();
    cmd->add_option("--epsilon", mc.epsilon, "model parameter")->capture_default_str();
    cmd->add_option("--refine", mc.refine, "berger refinement level")->capture_default_str();
    cmd->add_option("--s2-refine", mc.s2_refine)->capture_default_str();
    cmd->add_option("--t-slices", mc.t_slices)->capture_default_str();
    cmd->add_option("--cap-layers", mc.cap_layers)->capture_default_str();
    cmd->add_option("--out", out_path, "report path")->capture_default_str();
    cmd->add_option("--threads", threads)->capture_default_str();
    cmd->add_option("--tol", tol)->capture_default_str();
  };

  // spectrum
  auto* sc_spectrum = app.add_subcommand("spectrum", "coexact 1-form eigenvalues");
  int sp_count = 1, sp_seed = 1;
  bool sp_forms = false;
  add_mesh_opts(sc_spectrum);
  sc_spectrum->add_option("--count", sp_count, "eigenvalues to compute")->capture_default_str();
  sc_spectrum->add_option("--seed", sp_seed)->capture_default_str();
  sc_spectrum->add_flag("--eigenforms", sp_forms, "embed eigenforms in the report");
  std::string export_prefix;
  sc_spectrum->add_option("--export-matrices", export_prefix,
                          "write M0..M3, D0, D1 in coordinate text form");

  // homology
  auto* sc_homology = app.add_subcommand("homology", "integer homology basis and torsion");
  add_mesh_opts(sc_homology);
  bool snf_basis = false;
  sc_homology->add_flag("--snf", snf_basis, "force the Smith-normal-form path on models");

  // filling
  auto* sc_filling = app.add_subcommand("filling", "minimal filling area of a cycle");
  std::string cycle_name = "fiber";
  bool with_chain = false;
  add_mesh_opts(sc_filling);
  sc_filling->add_option("--cycle", cycle_name, "fiber | meridian | square | chain JSON file")
      ->capture_default_str();
  sc_filling->add_flag("--chain", with_chain, "embed the filling 2-chain");

  // cheeger
  auto* sc_cheeger = app.add_subcommand("cheeger", "upper bound on the discrete h^1");
  CheegerConfig ch_cfg;
  add_mesh_opts(sc_cheeger);
  sc_cheeger->add_option("--tree-cycles", ch_cfg.tree_cycles)->capture_default_str();
  sc_cheeger->add_option("--edge-cycles", ch_cfg.edge_cycles)->capture_default_str();
  sc_cheeger->add_option("--max-lp", ch_cfg.max_lp_calls)->capture_default_str();

  // montecarlo
  auto* sc_mc = app.add_subcommand("montecarlo", "trajectory construction and LLN estimates");
  MonteCarloConfig mcc;
  std::string mode = "analytic";
  std::string dump_path;
  add_mesh_opts(sc_mc);
  sc_mc->add_option("--n-traj", mcc.n, "number of trajectories")->capture_default_str();
  sc_mc->add_option("--T", mcc.T, "integration time per trajectory")->capture_default_str();
  sc_mc->add_option("--seed", mcc.seed, "mandatory random seed")->required();
  sc_mc->add_option("--mode", mode, "analytic (torus closed form) | discrete")
      ->capture_default_str();
  sc_mc->add_option("--dump-trajectories", dump_path, "per-trajectory polyline CSV");

  // berger
  auto* sc_berger = app.add_subcommand("berger", "closed-form invariant reduction");
  double bg_eps = 0.5;
  std::string bg_out = "report.json";
  sc_berger->add_option("--epsilon", bg_eps)->capture_default_str();
  sc_berger->add_option("--out", bg_out)->capture_default_str();

  // cusp
  auto* sc_cusp = app.add_subcommand("cusp", "interval Dirichlet eigenvalue of the cusp model");
  double cu_eps = std::exp(-5.0);
  int cu_grid = 2048;
  std::string cu_out = "report.json";
  sc_cusp->add_option("--epsilon", cu_eps)->capture_default_str();
  sc_cusp->add_option("--grid", cu_grid)->capture_default_str();
  sc_cusp->add_option("--out", cu_out)->capture_default_str();

  // verify-all
  auto* sc_verify = app.add_subcommand("verify-all", "run the acceptance suite");
  bool vquick = false;
  unsigned vseed = 7;
  sc_verify->add_flag("--quick", vquick, "trimmed sizes");
  sc_verify->add_option("--seed", vseed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // invalid configuration
  }

  try {
    if (sc_spectrum->parsed()) {
      auto L = load(mc);
      auto M = assemble_metric(L.X, L.geometry);
      SpectralOptions so;
      so.seed = sp_seed;
      so.tol = tol;
      if (!export_prefix.empty()) {
        for (int k = 0; k <= 3; ++k)
          write_text(export_prefix + "M" + std::to_string(k) + ".txt",
                     export_matrix_coordinate(M.mass[k]));
        write_text(export_prefix + "D0.txt", export_matrix_coordinate(M.d0()));
        write_text(export_prefix + "D1.txt", export_matrix_coordinate(M.d1()));
      }
      auto res = coexact_spectrum(M, sp_count, &L.basis, so);
      json body = json::parse(res.to_json(sp_forms));
      body["total_volume"] = M.total_volume;
      if (!res.eigenforms.empty())
        body["sup_l2_ratio_first"] = sup_l2_ratio(M, res.eigenforms[0]);
      L.config["count"] = sp_count;
      L.config["seed"] = sp_seed;
      write_report(out_path, body, L.config);
    } else if (sc_homology->parsed()) {
      auto L = load(mc, true);
      HomologyBasis computed;
      const HomologyBasis* use = &L.basis;
      if (snf_basis && mc.mesh_file.empty()) {
        computed = homology_basis(*L.X);
        use = &computed;
      }
      write_report(out_path, json::parse(use->to_json()), L.config);
    } else if (sc_filling->parsed()) {
      auto L = load(mc);
      auto M = assemble_metric(L.X, L.geometry);
      Chain gamma = named_cycle(L, cycle_name);
      auto fill = min_filling_area(M, L.basis, gamma);
      json body = {{"area", fill.area},
                   {"r_used", fill.r_used},
                   {"lp_status", to_string(fill.lp_status)},
                   {"residual", fill.residual},
                   {"lp_iterations", fill.lp_iterations},
                   {"cycle_length", chain_length(M, gamma)}};
      if (with_chain) {
        json ch = json::array();
        for (int f = 0; f < fill.chain.size(); ++f)
          if (fill.chain[f] != 0) ch.push_back({f, fill.chain[f]});
        body["chain"] = ch;
      }
      L.config["cycle"] = cycle_name;
      write_report(out_path, body, L.config);
    } else if (sc_cheeger->parsed()) {
      auto L = load(mc);
      auto M = assemble_metric(L.X, L.geometry);
      if (L.special_cycle) ch_cfg.extra_cycles.push_back(*L.special_cycle);
      auto est = cheeger_estimate(M, L.basis, ch_cfg);
      json body = {{"h1_upper", est.h1_upper},
                   {"cycles_examined", est.cycles_examined},
                   {"witness", chain_to_json(est.witness)},
                   {"witness_area", est.witness_filling.area},
                   {"witness_r", est.witness_filling.r_used}};
      write_report(out_path, body, L.config);
      write_text(out_path + ".csv", est.to_csv());
    } else if (sc_mc->parsed()) {
      auto L = load(mc);
      auto M = assemble_metric(L.X, L.geometry);
      mcc.threads = threads;
      MonteCarloReport rep;
      if (mode == "analytic") {
        if (mc.model != "torus")
          throw CLI::ValidationError("--mode", "analytic mode is the flat-torus eigenform run");
        rep = run_monte_carlo_torus_analytic(M, L.basis, mcc);
      } else {
        SpectralOptions so;
        so.seed = (int)mcc.seed;
        auto spec = coexact_spectrum(M, 1, &L.basis, so);
        rep = run_monte_carlo(M, L.basis, spec.eigenforms[0], mcc);
      }
      L.config["n_traj"] = mcc.n;
      L.config["T"] = mcc.T;
      L.config["seed"] = mcc.seed;
      L.config["mode"] = mode;
      write_report(out_path, json::parse(rep.to_json()), L.config);
      if (!dump_path.empty()) {
        // Re-trace the sampled trajectories, streaming one CSV row per
        // segment endpoint.
        std::ostringstream csv;
        csv << "trajectory,t,x,y,z,cell\n";
        CellField field;
        std::optional<Vec> alpha;
        if (mode == "analytic") {
          // per-trajectory constant fields are rebuilt below
        } else {
          SpectralOptions so;
          so.seed = (int)mcc.seed;
          auto spec = coexact_spectrum(M, 1, &L.basis, so);
          field = build_vector_field(M, spec.eigenforms[0]).field;
        }
        std::vector<double> cumvol(M.X().simplex_count(3));
        double acc = 0;
        for (Index t = 0; t < M.X().simplex_count(3); ++t) {
          acc += M.cells[t].volume;
          cumvol[t] = acc;
        }
        for (long i = 0; i < mcc.n; ++i) {
          // Same per-trajectory stream as the estimator.
          unsigned long long s = mcc.seed * 0x9e3779b97f4a7c15ull +
                                 (unsigned long long)i * 2654435761ull + 1;
          auto next = [&]() {
            s += 0x9e3779b97f4a7c15ull;
            unsigned long long z = s;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
            return (double)((z ^ (z >> 31)) >> 11) * 0x1.0p-53;
          };
          double u = next() * acc;
          Index tet = (Index)(std::lower_bound(cumvol.begin(), cumvol.end(), u) - cumvol.begin());
          Eigen::Vector4d bary;
          double bsum = 0;
          for (int c = 0; c < 4; ++c) {
            bary[c] = -std::log(std::max(next(), 1e-300));
            bsum += bary[c];
          }
          bary /= bsum;
          CellField traj_field;
          const CellField* use_field = &field;
          if (mode == "analytic") {
            double z0 = M.position(tet, bary).z();
            double speed = 2 * M_PI * std::sqrt(2.0) * std::sin(2 * M_PI * z0);
            traj_field = constant_field(M, Eigen::Vector3d(0, -speed, 0));
            use_field = &traj_field;
          }
          double tcur = 0;
          TraceOptions topt;
          topt.time = mcc.T;
          topt.sink = [&](const CurveSegment& seg, double dt) {
            Eigen::Vector3d p = M.position(seg.tet, seg.to);
            tcur += dt;
            char line[160];
            std::snprintf(line, sizeof line, "%ld,%.12g,%.12g,%.12g,%.12g,%d\n", i, tcur, p.x(),
                          p.y(), p.z(), seg.tet);
            csv << line;
          };
          integrate_trajectory(M, *use_field, tet, bary, topt);
        }
        write_text(dump_path, csv.str());
      }
    } else if (sc_berger->parsed()) {
      models::BergerModel model{bg_eps};
      auto spec = models::berger_spectrum_invariant(model);
      auto [ratio, area] = models::berger_h1_bounds(model);
      json body = {{"epsilon", bg_eps},
                   {"invariant_eigenvalues", spec.eigenvalues},
                   {"smallest_coexact", spec.smallest_coexact},
                   {"fiber_length", spec.fiber_length},
                   {"base_area", spec.base_area},
                   {"h1_fiber_ratio_upper", ratio},
                   {"filling_area_lower", area}};
      write_report(bg_out, body, {{"epsilon", bg_eps}});
    } else if (sc_cusp->parsed()) {
      auto r = models::cusp_eigenvalue({cu_eps}, cu_grid);
      json body = {{"epsilon", cu_eps},
                   {"grid", cu_grid},
                   {"fd_value", r.fd_value},
                   {"analytic_value", r.analytic_value},
                   {"rayleigh", r.rayleigh}};
      write_report(cu_out, body, {{"epsilon", cu_eps}, {"grid", cu_grid}});
    } else if (sc_verify->parsed()) {
      verify::SuiteOptions vo;
      vo.quick = vquick;
      vo.seed = vseed;
      vo.on_result = [](const verify::CriterionResult& r) {
        std::printf("[%s] %2d %-55s (%.1fs) %s\n", r.pass ? "PASS" : "FAIL", r.id,
                    r.name.c_str(), r.seconds, r.detail.c_str());
        std::fflush(stdout);
      };
      auto results = verify::run_acceptance(vo);
      int failed = 0;
      for (auto& r : results) failed += r.pass ? 0 : 1;
      std::printf("%d/%zu criteria passed\n", (int)results.size() - failed, results.size());
      return failed ? 3 : 0;
    }
  } catch (const CLI::Error& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    json err = {{"error", e.what()}};
    std::cerr << err.dump() << "\n";
    return 3;
  }
  return 0;
}
