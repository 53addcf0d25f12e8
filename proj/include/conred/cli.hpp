#pragma once

#include <algorithm>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "conred/scene.hpp"

// Command-line front end: check / lift / reduce / presymplectic.
// Exit codes: 0 all checks pass, 1 a check failed, 2 input or validation
// error.

namespace conred {

namespace cli {

struct CommonArgs {
  std::string scene_path;
  std::string output;
  std::string format = "text";
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
};

inline void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("scene", args.scene_path, "scene file (JSON)")->required();
  cmd->add_option("-o,--output", args.output, "output file");
  cmd->add_option("--format", args.format, "report format")
      ->check(CLI::IsMember({"text", "json"}));
  cmd->add_option("--seed", args.seed, "override the scene seed");
  cmd->add_option("--tol", args.tol, "override the residual tolerance");
}

inline SceneFile load_scene(const CommonArgs& args) {
  SceneFile scene = SceneFile::load(args.scene_path);
  if (args.seed) scene.seed = *args.seed;
  if (args.tol) scene.tolerances.residual = *args.tol;
  return scene;
}

/// Renders the report (plus optional extra JSON fields) to `out`, and to the
/// JSON file at `path` when given.
inline void emit_report(const CheckReport& report, const CommonArgs& args, std::ostream& out,
                        const nlohmann::ordered_json& extra = {}) {
  nlohmann::ordered_json doc = report_to_json(report);
  for (const auto& [key, value] : extra.items()) doc[key] = value;
  if (args.format == "json")
    out << doc.dump(2) << "\n";
  else
    print_text_report(report, out);
}

inline double kernel_torsion_residual(const ConnectionCoeffs& conn, const TwoFormField& omega,
                                      const std::vector<Point>& pts) {
  const auto torsion = torsion_tensor(conn);
  const int d = conn.dim();
  double worst = 0.0;
  for (const auto& p : pts) {
    const EvalEnv env = conn.chart().env(p);
    const Matrix w = omega.evaluate(p);
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j)
        for (int wc = 0; wc < d; ++wc) {
          double sum = 0.0;
          for (int l = 0; l < d; ++l) sum += torsion.at(l, i, j).evaluate(env) * w(l, wc);
          worst = std::max(worst, std::abs(sum));
        }
  }
  return worst;
}

inline PresymplecticStructure structure_from_scene(const SceneFile& scene) {
  if (!scene.two_form || scene.two_form->declared_kind != FormKind::Presymplectic)
    throw SceneError("scene has no presymplectic two_form");
  const int rank = scene.two_form->declared_rank;
  const int p = scene.presymplectic ? scene.presymplectic->p : scene.chart.dim() - rank;
  return PresymplecticStructure(scene.chart, *scene.two_form, rank / 2, p, scene.seed);
}

/// The checks cmd_check runs, as applicable to the scene contents.
inline CheckReport scene_checks(const SceneFile& scene) {
  CheckReport report;
  const auto pts = scene.chart.sample_points(scene.seed);
  const double tol = scene.tolerances.residual;

  if (scene.two_form) {
    const TwoFormField& form = *scene.two_form;
    {
      CheckItem item;
      item.name = "closed";
      item.tolerance = 1e-10;
      item.max_residual = closedness_residual(form, pts);
      item.pass = item.max_residual <= item.tolerance;
      report.add(item);
    }
    if (form.declared_kind == FormKind::Symplectic) {
      CheckItem item;
      item.name = "nondegenerate";
      item.tolerance = scene.tolerances.rank;
      double smallest = std::numeric_limits<double>::infinity();
      for (const auto& p : pts) {
        const double sv = smallest_singular_value(form.evaluate(p));
        if (sv < smallest) {
          smallest = sv;
          item.witness = p;
        }
      }
      item.max_residual = smallest;
      item.pass = smallest > item.tolerance;
      item.detail = "smallest singular value of [omega_ij]";
      report.add(item);
    } else {
      CheckItem item;
      item.name = "constant_rank";
      item.tolerance = 1e-8;
      const int rank = form.declared_rank;
      double worst_tail = 0.0;
      double smallest_lead = std::numeric_limits<double>::infinity();
      for (const auto& p : pts) {
        const auto sv = singular_values(form.evaluate(p));
        for (int i = 0; i < static_cast<int>(sv.size()); ++i) {
          if (i < rank) {
            smallest_lead = std::min(smallest_lead, sv[i]);
          } else if (sv[i] >= worst_tail) {
            worst_tail = sv[i];
            item.witness = p;
          }
        }
      }
      item.max_residual = worst_tail;
      item.pass = worst_tail <= item.tolerance && smallest_lead > 1e-6;
      item.detail = "singular values beyond the declared rank (leading ones must stay above 1e-6)";
      report.add(item);
    }
  }

  if (scene.connection && scene.two_form) {
    const ConnectionCoeffs& conn = *scene.connection;
    const TwoFormField& form = *scene.two_form;
    {
      CheckItem item;
      item.name = "compatible";
      item.tolerance = tol;
      item.max_residual = max_residual(nabla_omega(conn, form), scene.chart, pts);
      item.pass = item.max_residual <= item.tolerance;
      item.detail = "max |(nabla omega)_{ij;k}|";
      report.add(item);
    }
    if (form.declared_kind == FormKind::Symplectic) {
      CheckItem item;
      item.name = "torsion_free";
      item.tolerance = tol;
      item.max_residual = max_residual(torsion_tensor(conn), scene.chart, pts);
      item.pass = item.max_residual <= item.tolerance;
      report.add(item);
    } else {
      CheckItem item;
      item.name = "torsion_kernel_valued";
      item.tolerance = tol;
      item.max_residual = kernel_torsion_residual(conn, form, pts);
      item.pass = item.max_residual <= item.tolerance;
      item.detail = "max |omega(T(X,Y), Z)|";
      report.add(item);

      const PresymplecticStructure ps = structure_from_scene(scene);
      report.add(curvature_condition_check(conn, ps, scene.seed, tol));
      report.append(projectability_check(conn, ps, scene.seed));
    }
  }
  return report;
}

inline int cmd_check(const CommonArgs& args, std::ostream& out) {
  const SceneFile scene = load_scene(args);
  const CheckReport report = scene_checks(scene);
  emit_report(report, args, out);
  if (!args.output.empty()) {
    std::ofstream file(args.output);
    if (!file) throw SceneError("cannot write report to '" + args.output + "'");
    file << report_to_json(report).dump(2) << "\n";
  }
  return report.overall_pass() ? 0 : 1;
}

inline int cmd_lift(const CommonArgs& args, bool symplectify, std::ostream& out) {
  SceneFile scene = load_scene(args);
  if (!scene.connection) throw SceneError("lift requires a base connection in the scene");

  const CotangentChart cc = CotangentChart::over(scene.chart);
  const ConnectionCoeffs lifted = symplectify
                                      ? build_affine_symplectic_connection(*scene.connection, cc,
                                                                           scene.seed)
                                      : lift_connection(*scene.connection, cc, scene.seed);
  const TwoFormField omega = canonical_symplectic_form(cc);
  const auto pts = cc.total.sample_points(scene.seed);

  CheckReport report;
  {
    CheckItem item;
    item.name = "lift_compatible";
    item.tolerance = scene.tolerances.residual;
    item.max_residual = max_residual(nabla_omega(lifted, omega), cc.total, pts);
    item.pass = item.max_residual <= item.tolerance;
    report.add(item);
  }
  if (symplectify) {
    CheckItem item;
    item.name = "lift_torsion_free";
    item.tolerance = scene.tolerances.residual;
    item.max_residual = max_residual(torsion_tensor(lifted), cc.total, pts);
    item.pass = item.max_residual <= item.tolerance;
    report.add(item);
  }
  emit_report(report, args, out);

  SceneFile result;
  result.chart = cc.total;
  result.connection = lifted;
  result.two_form = omega;
  result.cotangent = SceneFile::CotangentBlock{cc.n, *scene.connection};
  result.seed = scene.seed;
  result.tolerances = scene.tolerances;
  if (!args.output.empty()) result.save(args.output);

  return report.overall_pass() ? 0 : 1;
}

inline int cmd_reduce(const CommonArgs& args, std::ostream& out) {
  SceneFile scene = load_scene(args);
  if (!scene.reduction) throw SceneError("reduce requires a 'reduction' block in the scene");
  if (scene.two_form && scene.two_form->declared_kind != FormKind::Symplectic)
    throw SceneError("reduce requires a symplectic two_form");

  const ScalingTranslationScene st(scene.reduction->n, scene.reduction->h, scene.reduction->xi);
  const CotangentChart cc = CotangentChart::from_total(scene.chart, st.n);
  const ConnectionCoeffs conn =
      scene.connection ? *scene.connection : ConnectionCoeffs::zero(scene.chart);
  std::optional<TwoFormField> ambient;
  if (scene.two_form) ambient = *scene.two_form;

  const SceneReductionResult result = reduce_scene(conn, st, cc, st.xi, scene.seed, ambient);

  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
  {
    nlohmann::ordered_json moment = nlohmann::ordered_json::array();
    for (const auto& j : result.moment_map) moment.push_back(j.simplified().str());
    extra["moment_map"] = std::move(moment);

    nlohmann::ordered_json level = nlohmann::ordered_json::object();
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (int r = 0; r < result.level_set.constraints().rows(); ++r) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      for (int c = 0; c < result.level_set.constraints().cols(); ++c)
        row.push_back(result.level_set.constraints()(r, c));
      rows.push_back(std::move(row));
    }
    level["constraints"] = std::move(rows);
    nlohmann::ordered_json vals = nlohmann::ordered_json::array();
    for (int r = 0; r < result.level_set.values().size(); ++r)
      vals.push_back(result.level_set.values()(r));
    level["values"] = std::move(vals);
    level["dimension"] = result.level_set.dim();
    extra["level_set"] = std::move(level);

    extra["quotient_coords"] = result.quotient.chart.coords();
  }

  if (args.format == "text") {
    out << "moment map:";
    for (const auto& j : result.moment_map) out << " " << j.simplified().str() << ";";
    out << "\n";
    out << "level set: dimension " << result.level_set.dim() << ", " << result.level_set.codim()
        << " constraints\n";
    out << "quotient coordinates:";
    for (const auto& c : result.quotient.chart.coords()) out << " " << c;
    out << "\n";
  }
  emit_report(result.checks, args, out, extra);

  if (!args.output.empty() && result.reduced) {
    SceneFile quotient_scene;
    quotient_scene.chart = result.quotient.chart;
    quotient_scene.connection = *result.reduced;
    quotient_scene.two_form = result.reduced_form;
    quotient_scene.seed = scene.seed;
    quotient_scene.tolerances = scene.tolerances;
    quotient_scene.save(args.output);
  }
  return result.checks.overall_pass() ? 0 : 1;
}

inline std::string derived_quotient_path(const std::string& output) {
  const std::size_t dot = output.rfind('.');
  if (dot == std::string::npos || output.find('/', dot) != std::string::npos)
    return output + "_quotient.json";
  return output.substr(0, dot) + "_quotient" + output.substr(dot);
}

inline int cmd_presymplectic(const CommonArgs& args, bool reduce, const std::string& quotient_out,
                             std::ostream& out) {
  SceneFile scene = load_scene(args);
  const PresymplecticStructure ps = structure_from_scene(scene);
  const SplittingS split = ps.splitting();
  const ConnectionCoeffs k = (scene.presymplectic && scene.presymplectic->reference)
                                 ? *scene.presymplectic->reference
                                 : flat_reference(ps);
  const PresymplecticBuild build = build_presymplectic_connection(ps, split, k, scene.seed);
  const auto pts = ps.chart().sample_points(scene.seed);
  const double tol = scene.tolerances.residual;
  const int d = ps.chart().dim();

  CheckReport report;
  {
    CheckItem item;
    item.name = "compatible";
    item.tolerance = tol;
    item.max_residual = max_residual(nabla_omega(build.connection, ps.omega()), ps.chart(), pts);
    item.pass = item.max_residual <= item.tolerance;
    report.add(item);
  }
  {
    CheckItem item;
    item.name = "torsion_kernel_valued";
    item.tolerance = tol;
    item.max_residual = kernel_torsion_residual(build.connection, ps.omega(), pts);
    item.pass = item.max_residual <= item.tolerance;
    report.add(item);
  }
  {
    // the skew stage must preserve compatibility on its own
    CheckItem item = residual_check("skew_identity", 1e-9, pts, [&](const Point& p) {
      const EvalEnv env = ps.chart().env(p);
      const Matrix w = ps.omega().evaluate(p);
      double worst = 0.0;
      for (int i : split.transverse)
        for (int j : split.transverse)
          for (int l : split.transverse) {
            double sum = 0.0;
            for (int kk = 0; kk < d; ++kk)
              sum += build.skew.at(kk, j, i).evaluate(env) * w(kk, l) +
                     w(j, kk) * build.skew.at(kk, l, i).evaluate(env);
            worst = std::max(worst, std::abs(sum));
          }
      return worst;
    });
    item.detail = "omega(A(X,Y),Z) + omega(Y,A(X,Z))";
    report.add(item);
  }
  {
    const auto nd = nabla_omega(build.d_connection, ps.omega());
    CheckItem item = residual_check("cyclic_compatibility", 1e-9, pts, [&](const Point& p) {
      const EvalEnv env = ps.chart().env(p);
      double worst = 0.0;
      for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j)
          for (int kk = j + 1; kk < d; ++kk)
            worst = std::max(worst, std::abs(nd.at(i, j, kk).evaluate(env) +
                                             nd.at(j, kk, i).evaluate(env) +
                                             nd.at(kk, i, j).evaluate(env)));
      return worst;
    });
    item.detail = "cyclic sum of (D_X omega)(Y,Z), which equals d omega";
    report.add(item);
  }
  report.add(curvature_condition_check(build.connection, ps, scene.seed, tol));

  std::optional<PresymplecticReduction> reduction;
  const CheckReport projectability = projectability_check(build.connection, ps, scene.seed);
  if (reduce && projectability.overall_pass()) {
    reduction = reduce_presymplectic(build.connection, ps, scene.seed);
    report.append(reduction->checks);
  } else {
    report.append(projectability);
  }

  emit_report(report, args, out);

  if (!args.output.empty()) {
    SceneFile built;
    built.chart = ps.chart();
    built.connection = build.connection;
    built.two_form = ps.omega();
    built.two_form->declared_kind = FormKind::Presymplectic;
    built.two_form->declared_rank = 2 * ps.n();
    built.presymplectic = SceneFile::PresymplecticBlock{ps.p(), k};
    built.seed = scene.seed;
    built.tolerances = scene.tolerances;
    built.save(args.output);
  }
  if (reduction) {
    std::string qpath = quotient_out;
    if (qpath.empty() && !args.output.empty()) qpath = derived_quotient_path(args.output);
    if (!qpath.empty()) {
      SceneFile quotient_scene;
      quotient_scene.chart = reduction->quotient_chart;
      quotient_scene.connection = reduction->reduced;
      quotient_scene.two_form = reduction->reduced_form;
      quotient_scene.seed = scene.seed;
      quotient_scene.tolerances = scene.tolerances;
      quotient_scene.save(qpath);
    }
  }
  return report.overall_pass() ? 0 : 1;
}

}  // namespace cli

/// Entry point shared by the binary and the tests; `args` excludes the
/// program name.
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"conred: connections compatible with symplectic and presymplectic structures"};
  app.require_subcommand(1);

  cli::CommonArgs check_args, lift_args, reduce_args, presym_args;
  bool symplectify = false;
  bool do_reduce = false;
  std::string quotient_out;

  CLI::App* check = app.add_subcommand("check", "run the residual checks a scene declares");
  cli::add_common(check, check_args);

  CLI::App* lift = app.add_subcommand("lift", "lift a base connection to the cotangent bundle");
  cli::add_common(lift, lift_args);
  lift->add_flag("--symplectify", symplectify,
                 "apply the symmetric-part and compatibility corrections");

  CLI::App* reduce = app.add_subcommand("reduce", "reduce a scene through its moment-map level set");
  cli::add_common(reduce, reduce_args);

  CLI::App* presym =
      app.add_subcommand("presymplectic", "build and check a presymplectic connection");
  cli::add_common(presym, presym_args);
  presym->add_flag("--reduce", do_reduce, "also reduce to the local leaf space");
  presym->add_option("--quotient-out", quotient_out, "path for the quotient scene");

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (check->parsed()) return cli::cmd_check(check_args, out);
    if (lift->parsed()) return cli::cmd_lift(lift_args, symplectify, out);
    if (reduce->parsed()) return cli::cmd_reduce(reduce_args, out);
    if (presym->parsed()) return cli::cmd_presymplectic(presym_args, do_reduce, quotient_out, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  err << "error: no command given\n";
  return 2;
}

}  // namespace conred
