#pragma once

#include "koopgauss/io.hpp"
#include "koopgauss/koopman.hpp"
#include "koopgauss/oracles.hpp"
#include "koopgauss/ou_process.hpp"

#include <CLI11.hpp>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace koopgauss {

namespace detail {

inline Vector parse_vector_arg(const std::string& text, const char* who) {
  std::string trimmed = text;
  trimmed.erase(0, trimmed.find_first_not_of(" \t"));
  if (!trimmed.empty() && trimmed.front() == '[') {
    try {
      return vector_from_json(Json::parse(trimmed), who);
    } catch (const Json::parse_error& e) {
      throw std::invalid_argument(std::string(who) + ": " + e.what());
    }
  }
  std::vector<double> vals;
  std::size_t pos = 0;
  while (pos <= trimmed.size()) {
    std::size_t comma = trimmed.find(',', pos);
    std::string tok = trimmed.substr(pos, comma == std::string::npos ? comma : comma - pos);
    try {
      std::size_t used = 0;
      double v = std::stod(tok, &used);
      while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used]))) ++used;
      if (used != tok.size()) throw std::invalid_argument(tok);
      vals.push_back(v);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string(who) + ": cannot parse component \"" + tok +
                                  "\"");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (vals.empty()) throw std::invalid_argument(std::string(who) + ": empty vector");
  Vector v(static_cast<Index>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i) v(static_cast<Index>(i)) = vals[i];
  return v;
}

inline LinearSDE load_system(const std::string& path) {
  SystemSpec spec = parse_system_spec(read_json_file(path));
  return LinearSDE(spec.A, spec.B);
}

inline Covariance load_covariance(const std::string& path) {
  return parse_covariance(read_json_file(path));
}

inline SpanElement load_observable(const std::string& path) {
  return parse_observable(read_json_file(path));
}

struct CliOptions {
  std::string system_path;
  std::string covariance_path;
  std::string observable_path;
  std::string c1_path;
  std::string c2_path;
  std::string z_text;
  std::string w_text;
  std::string point_text;
  double time = 0.0;
  double t_first = 0.0;
  double s_second = 0.0;
  std::uint64_t samples = 100000;
  std::uint64_t seed = 42;
};

}  // namespace detail

// Entry point shared by the binary and in-process tests. Exit codes: 0 on
// success, 1 on a mathematically meaningful negative (certificate fails, not
// included, invalid system), 2 on malformed input.
inline int cli_run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  detail::CliOptions opt;

  CLI::App app{"Closed-form Koopman propagation of Gaussian-kernel observables for linear "
               "SDEs, with certificates and verification oracles"};
  app.require_subcommand(1);

  CLI::App* cmd_validate = app.add_subcommand(
      "validate", "Check controllability and stability of a system, report Sigma");
  cmd_validate->add_option("--system", opt.system_path, "SystemSpec JSON file")->required();

  CLI::App* cmd_check =
      app.add_subcommand("check", "Evaluate the invariance certificate for (system, C)");
  cmd_check->add_option("--system", opt.system_path, "SystemSpec JSON file")->required();
  cmd_check->add_option("--covariance", opt.covariance_path, "Covariance JSON file")
      ->required();

  CLI::App* cmd_propagate =
      app.add_subcommand("propagate", "Apply the Koopman operator to an observable");
  cmd_propagate->add_option("--system", opt.system_path, "SystemSpec JSON file")->required();
  cmd_propagate->add_option("--observable", opt.observable_path, "Observable JSON file")
      ->required();
  cmd_propagate->add_option("--time", opt.time, "horizon t >= 0")->required();

  CLI::App* cmd_norm =
      app.add_subcommand("norm-bound", "Report the RKHS norm chain for an observable");
  cmd_norm->add_option("--system", opt.system_path, "SystemSpec JSON file")->required();
  cmd_norm->add_option("--observable", opt.observable_path, "Observable JSON file")
      ->required();
  cmd_norm->add_option("--time", opt.time, "horizon t >= 0")->required();

  CLI::App* cmd_mc = app.add_subcommand(
      "verify-mc", "Cross-check the closed-form image against Monte Carlo");
  cmd_mc->add_option("--system", opt.system_path, "SystemSpec JSON file")->required();
  cmd_mc->add_option("--observable", opt.observable_path, "Observable JSON file")->required();
  cmd_mc->add_option("--time", opt.time, "horizon t > 0")->required();
  cmd_mc->add_option("--point", opt.point_text, "evaluation point, e.g. [0.3] or 0.3,0.1")
      ->required();
  cmd_mc->add_option("--samples", opt.samples, "sample count (default 100000)");
  cmd_mc->add_option("--seed", opt.seed, "RNG seed (default 42)");

  CLI::App* cmd_semi =
      app.add_subcommand("semigroup", "Compare one-step and two-step propagation");
  cmd_semi->add_option("--system", opt.system_path, "SystemSpec JSON file")->required();
  cmd_semi->add_option("--observable", opt.observable_path, "Observable JSON file")
      ->required();
  cmd_semi->add_option("--t", opt.t_first, "first horizon")->required();
  cmd_semi->add_option("--s", opt.s_second, "second horizon")->required();

  CLI::App* cmd_scale = app.add_subcommand(
      "max-scale", "Largest tau such that tau*C still satisfies the certificate");
  cmd_scale->add_option("--system", opt.system_path, "SystemSpec JSON file")->required();
  cmd_scale->add_option("--covariance", opt.covariance_path, "Covariance JSON file")
      ->required();

  CLI::App* cmd_incl =
      app.add_subcommand("inclusion", "Test whether H_{C1} embeds into H_{C2}");
  cmd_incl->add_option("--c1", opt.c1_path, "Covariance JSON file")->required();
  cmd_incl->add_option("--c2", opt.c2_path, "Covariance JSON file")->required();

  CLI::App* cmd_prod = app.add_subcommand(
      "product-integral", "Integral of a product of two kernel sections over R^d");
  cmd_prod->add_option("--c1", opt.c1_path, "Covariance JSON file")->required();
  cmd_prod->add_option("--z", opt.z_text, "first center")->required();
  cmd_prod->add_option("--c2", opt.c2_path, "Covariance JSON file")->required();
  cmd_prod->add_option("--w", opt.w_text, "second center")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return 2;
  }

  Json report;
  Json inputs = Json::object();
  Json outputs = Json::object();
  std::string command;
  int exit_code = 0;
  std::string status = "ok";

  auto emit = [&]() {
    report["command"] = command;
    report["inputs"] = inputs;
    report["outputs"] = outputs;
    report["status"] = status;
    out << dump_deterministic(report);
    return exit_code;
  };

  try {
    if (cmd_validate->parsed()) {
      command = "validate";
      inputs["system"] = opt.system_path;
      SystemSpec spec = parse_system_spec(read_json_file(opt.system_path));
      require_square(spec.A, "validate");
      require_finite(spec.A, "validate");
      require_finite(spec.B, "validate");
      require_dim_cap(spec.A.rows(), "validate");
      if (spec.B.rows() != spec.A.rows())
        throw std::invalid_argument("validate: B must have as many rows as A");
      if (!spec.name.empty()) outputs["name"] = spec.name;

      Index rank = controllability_rank(spec.A, spec.B);
      std::complex<double> top = spectral_abscissa_eig(spec.A);
      bool controllable = rank == spec.A.rows();
      bool hurwitz = top.real() < 0.0;
      outputs["controllable"] = controllable;
      outputs["rank"] = static_cast<std::int64_t>(rank);
      outputs["hurwitz"] = hurwitz;
      outputs["spectral_abscissa"] = top.real();
      if (controllable && hurwitz) {
        LinearSDE sys(spec.A, spec.B);
        Matrix residual = spec.A * sys.sigma_inf() + sys.sigma_inf() * spec.A.transpose() +
                          sys.diffusion();
        outputs["sigma_inf"] = matrix_to_json(sys.sigma_inf());
        outputs["lyapunov_residual"] =
            residual.norm() / std::max(1.0, sys.diffusion().norm());
        exit_code = 0;
      } else {
        exit_code = 1;
      }
    } else if (cmd_check->parsed()) {
      command = "check";
      inputs["system"] = opt.system_path;
      inputs["covariance"] = opt.covariance_path;
      LinearSDE sys = detail::load_system(opt.system_path);
      Covariance cov = detail::load_covariance(opt.covariance_path);
      Certificate cert = certificate(sys, cov);
      outputs["slack"] = cert.slack;
      outputs["holds"] = cert.holds;
      status = cert.holds ? "ok" : "certificate-failed";
      exit_code = cert.holds ? 0 : 1;
    } else if (cmd_propagate->parsed()) {
      command = "propagate";
      inputs["system"] = opt.system_path;
      inputs["observable"] = opt.observable_path;
      inputs["time"] = opt.time;
      LinearSDE sys = detail::load_system(opt.system_path);
      SpanElement f = detail::load_observable(opt.observable_path);
      KoopmanImage img = propagate(sys, f, opt.time);
      out << dump_deterministic(image_to_json(img));
      return 0;
    } else if (cmd_norm->parsed()) {
      command = "norm-bound";
      inputs["system"] = opt.system_path;
      inputs["observable"] = opt.observable_path;
      inputs["time"] = opt.time;
      LinearSDE sys = detail::load_system(opt.system_path);
      SpanElement f = detail::load_observable(opt.observable_path);
      NormBoundReport rep = norm_bound_report(sys, f, opt.time, true);
      outputs["slack"] = rep.cert.slack;
      outputs["certified"] = rep.verified;
      outputs["tau"] = rep.tau;
      outputs["norm_f"] = rep.norm_f;
      outputs["norm_image_ct"] = rep.norm_image_ct;
      outputs["upper_proxy"] = rep.upper_proxy;
      outputs["bound"] = rep.bound;
      outputs["det_identity_lhs"] = rep.det_identity_lhs;
      outputs["det_identity_rhs"] = rep.det_identity_rhs;
      outputs["route_deviation"] = rep.route_deviation;
      outputs["chain_ok"] = rep.chain_ok;
      status = rep.verified ? "ok" : "certificate-failed";
      exit_code = rep.verified ? 0 : 1;
    } else if (cmd_mc->parsed()) {
      command = "verify-mc";
      inputs["system"] = opt.system_path;
      inputs["observable"] = opt.observable_path;
      inputs["time"] = opt.time;
      inputs["point"] = opt.point_text;
      inputs["samples"] = opt.samples;
      inputs["seed"] = opt.seed;
      LinearSDE sys = detail::load_system(opt.system_path);
      SpanElement f = detail::load_observable(opt.observable_path);
      Vector x = detail::parse_vector_arg(opt.point_text, "--point");
      double closed = image_eval(propagate(sys, f, opt.time), x);
      MCEstimate est = mc_koopman(sys, f, opt.time, x, opt.samples, opt.seed);
      double z = (closed - est.mean) / std::max(est.std_error, 1e-300);
      outputs["closed_form"] = closed;
      outputs["mc_mean"] = est.mean;
      outputs["std_error"] = est.std_error;
      outputs["z_score"] = z;
      exit_code = std::abs(z) <= 3.0 ? 0 : 1;
    } else if (cmd_semi->parsed()) {
      command = "semigroup";
      inputs["system"] = opt.system_path;
      inputs["observable"] = opt.observable_path;
      inputs["t"] = opt.t_first;
      inputs["s"] = opt.s_second;
      LinearSDE sys = detail::load_system(opt.system_path);
      SpanElement f = detail::load_observable(opt.observable_path);
      SemigroupReport rep = semigroup_check(sys, f, opt.t_first, opt.s_second);
      outputs["tau_dev"] = rep.tau_dev;
      outputs["cov_dev"] = rep.cov_dev;
      outputs["center_dev"] = rep.center_dev;
      outputs["max_rel_deviation"] = rep.max_rel_dev;
      exit_code = 0;
    } else if (cmd_scale->parsed()) {
      command = "max-scale";
      inputs["system"] = opt.system_path;
      inputs["covariance"] = opt.covariance_path;
      LinearSDE sys = detail::load_system(opt.system_path);
      Covariance cov = detail::load_covariance(opt.covariance_path);
      double tau = max_scale_tau(sys.A(), sys.B(), cov.matrix());
      if (std::isinf(tau))
        outputs["tau"] = "infinity";
      else
        outputs["tau"] = tau;
      exit_code = 0;
    } else if (cmd_incl->parsed()) {
      command = "inclusion";
      inputs["c1"] = opt.c1_path;
      inputs["c2"] = opt.c2_path;
      Covariance c1 = detail::load_covariance(opt.c1_path);
      Covariance c2 = detail::load_covariance(opt.c2_path);
      InclusionResult r = inclusion_test(c1, c2);
      outputs["included"] = r.included;
      outputs["slack"] = r.slack;
      if (r.embed_const) outputs["embed_const"] = *r.embed_const;
      exit_code = r.included ? 0 : 1;
    } else if (cmd_prod->parsed()) {
      command = "product-integral";
      inputs["c1"] = opt.c1_path;
      inputs["c2"] = opt.c2_path;
      inputs["z"] = opt.z_text;
      inputs["w"] = opt.w_text;
      Covariance c1 = detail::load_covariance(opt.c1_path);
      Covariance c2 = detail::load_covariance(opt.c2_path);
      Vector z = detail::parse_vector_arg(opt.z_text, "--z");
      Vector w = detail::parse_vector_arg(opt.w_text, "--w");
      double value = product_integral(c1, z, c2, w);
      outputs["value"] = value;
      if (c1.dim() <= 3) {
        Matrix prec = symmetrized(c1.inverse() * c1.inverse() + c2.inverse() * c2.inverse());
        Eigen::LLT<Matrix> llt(prec);
        if (llt.info() != Eigen::Success)
          throw IllPosedError("product-integral: degenerate precision sum");
        GaussianEnvelope env{llt.solve(c1.inverse() * (c1.inverse() * z) +
                                       c2.inverse() * (c2.inverse() * w)),
                             llt.solve(Matrix::Identity(c1.dim(), c1.dim()))};
        auto integrand = [&](const Vector& y) {
          return kernel_eval(c1, z, y) * kernel_eval(c2, w, y);
        };
        double quad = quad_integral(integrand, env, 40);
        outputs["quadrature"] = quad;
        outputs["rel_error"] =
            std::abs(value - quad) / std::max({std::abs(value), std::abs(quad), 1e-300});
      }
      exit_code = 0;
    }
  } catch (const NotControllableError& e) {
    outputs = Json::object();
    outputs["message"] = std::string(e.what());
    status = "invalid-input";
    exit_code = 1;
  } catch (const NotHurwitzError& e) {
    outputs = Json::object();
    outputs["message"] = std::string(e.what());
    status = "invalid-input";
    exit_code = 1;
  } catch (const CertificateError& e) {
    outputs = Json::object();
    outputs["message"] = std::string(e.what());
    status = "certificate-failed";
    exit_code = 1;
  } catch (const std::exception& e) {
    outputs = Json::object();
    outputs["message"] = std::string(e.what());
    status = "invalid-input";
    exit_code = 2;
  }

  return emit();
}

}  // namespace koopgauss
