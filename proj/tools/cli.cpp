#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "varhardy/bmo.hpp"
#include "varhardy/errors.hpp"
#include "varhardy/experiments.hpp"
#include "varhardy/hardy.hpp"
#include "varhardy/io.hpp"
#include "varhardy/varlp.hpp"

namespace varhardy::cli {

namespace {

struct Output {
  std::string text_json;
  std::string text_csv;
};

struct Common {
  std::string out_path;
  std::string format = "json";
};

struct Inputs {
  std::string space, exponent, function, martingale, alpha;
};

struct SupFlags {
  std::string mode = "auto";
  std::uint64_t cap = kDefaultEnumerationCap;
  std::size_t samples = 4096;
  std::uint64_t seed = 0;

  SupOptions options() const {
    SupOptions o;
    o.mode = mode == "exhaustive" ? SupMode::Exhaustive
                                  : (mode == "sampled" ? SupMode::Sampled : SupMode::Auto);
    o.cap = cap;
    o.samples = samples;
    o.seed = seed;
    return o;
  }
};

struct ExperimentFlags {
  std::uint64_t seed = 0;
  std::size_t trials = 100;
  int depth = 3;
  std::string space_kind = "dyadic";
  std::vector<double> weights{0.2, 0.3, 0.5};
  std::string exponent_law = "iid-uniform";
  double p_lo = 1.1;
  double p_hi = 3.0;
  std::string law = "cycle";
  int max_n = 20;
  bool refinement = false;
  bool perturbation = false;

  TrialConfig config() const {
    TrialConfig c;
    c.seed = seed;
    c.trials = trials;
    c.space.kind = space_kind == "tree" ? SpaceKind::Tree : SpaceKind::Dyadic;
    c.space.depth = depth;
    if (c.space.kind == SpaceKind::Tree) c.space.split_weights = weights;
    c.exponent.law = exponent_law == "constant"
                         ? ExponentLaw::Constant
                         : (exponent_law == "two-block" ? ExponentLaw::TwoBlock
                                                        : ExponentLaw::IidUniform);
    c.exponent.lo = p_lo;
    c.exponent.hi = p_hi;
    c.law = law == "normal"    ? MartingaleLaw::Normal
            : law == "uniform" ? MartingaleLaw::Uniform
            : law == "two-point" ? MartingaleLaw::TwoPoint
                                 : MartingaleLaw::Cycle;
    return c;
  }
};

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Output single_value(const char* name, const Json& j, double value) {
  return {dump(j), std::string(name) + "\n" + csv_number(value) + "\n"};
}

Output report_output(const ConstantReport& report) {
  return {dump(report_to_json(report)), report_to_csv(report)};
}

std::shared_ptr<const FilteredSpace> load_space(const std::string& path) {
  return std::make_shared<const FilteredSpace>(space_from_json(read_json_file(path)));
}

void write_output(const Output& result, const Common& common, const std::string& command,
                  std::ostream& out) {
  const std::string& text = common.format == "csv" ? result.text_csv : result.text_json;
  std::string path = common.out_path;
  if (path.empty()) {
    if (const char* dir = std::getenv("VARHARDY_OUT_DIR"); dir != nullptr && *dir != '\0')
      path = (std::filesystem::path(dir) / (command + "." + common.format)).string();
  }
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw ValidationError("cannot write " + path);
  file << text;
}

void add_sup_flags(CLI::App* cmd, SupFlags& flags) {
  cmd->add_option("--mode", flags.mode, "Stopping-time family")
      ->check(CLI::IsMember({"auto", "exhaustive", "sampled"}));
  cmd->add_option("--cap", flags.cap, "Enumeration cap");
  cmd->add_option("--samples", flags.samples, "Sampled family size");
  cmd->add_option("--sample-seed", flags.seed, "Seed for sampled stopping times");
}

void add_experiment_flags(CLI::App* cmd, ExperimentFlags& flags) {
  cmd->add_option("--seed", flags.seed, "Master seed (default 0)");
  cmd->add_option("--trials", flags.trials, "Number of trials")->check(CLI::PositiveNumber);
  cmd->add_option("--depth", flags.depth, "Space depth")->check(CLI::NonNegativeNumber);
  cmd->add_option("--space-kind", flags.space_kind, "dyadic or tree")
      ->check(CLI::IsMember({"dyadic", "tree"}));
  cmd->add_option("--weights", flags.weights, "Tree split weights");
  cmd->add_option("--exponent-law", flags.exponent_law, "constant, two-block or iid-uniform")
      ->check(CLI::IsMember({"constant", "two-block", "iid-uniform"}));
  cmd->add_option("--p-lo", flags.p_lo, "Lower exponent");
  cmd->add_option("--p-hi", flags.p_hi, "Upper exponent");
  cmd->add_option("--law", flags.law, "Martingale law")
      ->check(CLI::IsMember({"normal", "uniform", "two-point", "cycle"}));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Variable exponent martingale Hardy space toolkit", "varhardy"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--out", common.out_path, "Output file (default stdout or $VARHARDY_OUT_DIR)");
  app.add_option("--format", common.format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}));

  Inputs in;
  SupFlags sup;
  ExperimentFlags ex;
  std::string command;
  std::function<Output()> action;

  // space
  auto* space_cmd = app.add_subcommand("space", "Build filtered spaces");
  space_cmd->require_subcommand(1);
  int gen_depth = 1;
  auto* gen_dyadic = space_cmd->add_subcommand("gen-dyadic", "Dyadic filtration");
  gen_dyadic->add_option("--depth", gen_depth, "Depth N")->required();
  gen_dyadic->callback([&] {
    command = "space";
    action = [&] {
      const FilteredSpace s = build_dyadic_space(gen_depth);
      std::ostringstream csv;
      csv << "leaf,prob\n";
      for (Eigen::Index i = 0; i < s.leaf_count(); ++i)
        csv << i << ',' << csv_number(s.probs()[i]) << '\n';
      return Output{dump(space_to_json(s)), csv.str()};
    };
  });
  std::vector<double> tree_weights{0.2, 0.3, 0.5};
  auto* gen_tree = space_cmd->add_subcommand("gen-tree", "Homogeneous tree filtration");
  gen_tree->add_option("--depth", gen_depth, "Depth N")->required();
  gen_tree->add_option("--weights", tree_weights, "Split weights");
  gen_tree->callback([&] {
    command = "space";
    action = [&] {
      const FilteredSpace s = build_tree_space(gen_depth, tree_weights);
      std::ostringstream csv;
      csv << "leaf,prob\n";
      for (Eigen::Index i = 0; i < s.leaf_count(); ++i)
        csv << i << ',' << csv_number(s.probs()[i]) << '\n';
      return Output{dump(space_to_json(s)), csv.str()};
    };
  });

  // norm
  auto* norm_cmd = app.add_subcommand("norm", "Luxemburg norm of a function");
  norm_cmd->add_option("--space", in.space)->required();
  norm_cmd->add_option("--exponent", in.exponent)->required();
  norm_cmd->add_option("--function", in.function)->required();
  norm_cmd->callback([&] {
    command = "norm";
    action = [&] {
      const auto s = load_space(in.space);
      const Exponent p = exponent_from_json(read_json_file(in.exponent));
      const RandomVariable f = vector_from_json(read_json_file(in.function));
      const NormResult r = luxemburg_norm(*s, f, p);
      const Json j = {{"norm", r.norm}, {"iterations", r.iterations}, {"residual", r.residual}};
      return single_value("norm", j, r.norm);
    };
  });

  // decompose
  auto* dec_cmd = app.add_subcommand("decompose", "Atomic decomposition of a martingale");
  dec_cmd->add_option("--space", in.space)->required();
  dec_cmd->add_option("--exponent", in.exponent)->required();
  dec_cmd->add_option("--martingale", in.martingale)->required();
  dec_cmd->callback([&] {
    command = "decompose";
    action = [&] {
      const auto s = load_space(in.space);
      const Exponent p = exponent_from_json(read_json_file(in.exponent));
      const Martingale f = martingale_from_json(read_json_file(in.martingale), s);
      const AtomicDecomposition dec = atomic_decompose(f, p);
      Json j = decomposition_to_json(dec);
      j["a_quantity"] = a_quantity(*s, dec, p);
      j["hs_norm"] = hs_norm(f, p);
      std::ostringstream csv;
      csv << "k,mu\n";
      for (const AtomicTerm& t : dec.terms) csv << t.k << ',' << csv_number(t.mu) << '\n';
      return Output{dump(j), csv.str()};
    };
  });

  // check
  auto* check_cmd = app.add_subcommand("check", "Exponent and lemma checks");
  check_cmd->require_subcommand(1);
  std::string k_mode = "exact";
  auto* ck = check_cmd->add_subcommand("condition-k", "Condition K constant");
  ck->add_option("--space", in.space)->required();
  ck->add_option("--exponent", in.exponent)->required();
  ck->add_option("--k-mode", k_mode, "exact, brute-force or blocks")
      ->check(CLI::IsMember({"exact", "brute-force", "blocks"}));
  ck->callback([&] {
    command = "condition-k";
    action = [&] {
      const auto s = load_space(in.space);
      const Exponent p = exponent_from_json(read_json_file(in.exponent));
      const ConditionKMode mode = k_mode == "brute-force" ? ConditionKMode::BruteForce
                                  : k_mode == "blocks"    ? ConditionKMode::Blocks
                                                          : ConditionKMode::ExactPairwise;
      const ConditionK k = condition_k(*s, p, mode);
      return single_value("condition_k", {{"value", k.value}, {"witness", k.witness}}, k.value);
    };
  });
  auto* ca = check_cmd->add_subcommand("aoyama", "Aoyama constant");
  ca->add_option("--space", in.space)->required();
  ca->add_option("--exponent", in.exponent)->required();
  ca->callback([&] {
    command = "aoyama";
    action = [&] {
      const auto s = load_space(in.space);
      const Exponent p = exponent_from_json(read_json_file(in.exponent));
      const double c = aoyama_c(*s, p);
      return single_value("aoyama_c", {{"value", c}}, c);
    };
  });
  auto* cl = check_cmd->add_subcommand("lemma34", "Pointwise block inequality");
  cl->add_option("--space", in.space)->required();
  cl->add_option("--exponent", in.exponent)->required();
  cl->add_option("--function", in.function)->required();
  cl->callback([&] {
    command = "lemma34";
    action = [&] {
      const auto s = load_space(in.space);
      const Exponent p = exponent_from_json(read_json_file(in.exponent));
      const RandomVariable f = vector_from_json(read_json_file(in.function));
      return report_output(lemma34_check(*s, f, p));
    };
  });

  // bmo / lipschitz
  auto* bmo_cmd = app.add_subcommand("bmo", "BMO norm over stopping times");
  bmo_cmd->add_option("--space", in.space)->required();
  bmo_cmd->add_option("--exponent", in.exponent)->required();
  bmo_cmd->add_option("--martingale", in.martingale)->required();
  add_sup_flags(bmo_cmd, sup);
  bmo_cmd->callback([&] {
    command = "bmo";
    action = [&] {
      const auto s = load_space(in.space);
      const Exponent p = exponent_from_json(read_json_file(in.exponent));
      const Martingale f = martingale_from_json(read_json_file(in.martingale), s);
      const SupNormResult r = bmo_norm(f, p, sup.options());
      return single_value("bmo", sup_result_to_json(r), r.value);
    };
  });
  double lip_q = 2.0;
  auto* lip_cmd = app.add_subcommand("lipschitz", "Lipschitz norm over stopping times");
  lip_cmd->add_option("--space", in.space)->required();
  lip_cmd->add_option("--q", lip_q, "Integrability exponent q >= 1");
  lip_cmd->add_option("--alpha", in.alpha, "Smoothness alpha per leaf")->required();
  lip_cmd->add_option("--martingale", in.martingale)->required();
  add_sup_flags(lip_cmd, sup);
  lip_cmd->callback([&] {
    command = "lipschitz";
    action = [&] {
      const auto s = load_space(in.space);
      const RandomVariable alpha = vector_from_json(read_json_file(in.alpha));
      const Martingale f = martingale_from_json(read_json_file(in.martingale), s);
      const SupNormResult r = lipschitz_norm(f, lip_q, alpha, sup.options());
      return single_value("lipschitz", sup_result_to_json(r), r.value);
    };
  });

  // experiment
  auto* exp_cmd = app.add_subcommand("experiment", "Seeded constant estimation");
  exp_cmd->require_subcommand(1);
  const auto experiment = [&](const char* name, const char* help,
                              std::function<ConstantReport()> body) {
    auto* sub = exp_cmd->add_subcommand(name, help);
    add_experiment_flags(sub, ex);
    sub->callback([&, name, body] {
      command = name;
      action = [body] { return report_output(body()); };
    });
    return sub;
  };
  experiment("weak-type", "Weak type maximal inequality", [&] { return weak_type_sweep(ex.config()); });
  experiment("doob", "Strong type maximal inequality",
             [&] { return doob_strong_check(ex.config()); });
  auto* jn = experiment("jn", "BMO_p versus BMO_1", [&] {
    JnOptions o;
    o.refinement = ex.refinement;
    o.perturbation = ex.perturbation;
    return jn_equivalence(ex.config(), o);
  });
  jn->add_flag("--refinement", ex.refinement, "Also evaluate on the refined space");
  jn->add_flag("--perturbation", ex.perturbation, "Also evaluate on perturbed probabilities");
  auto* ejn = experiment("exp-jn", "Exponential distribution curve",
                         [&] { return exp_jn_sweep(ex.config(), sup.options()); });
  add_sup_flags(ejn, sup);
  auto* ns = experiment("nakai-sadasue", "Exponent outside condition K",
                        [&] { return nakai_sadasue(ex.max_n); });
  ns->add_option("--max-n", ex.max_n, "Largest N (at most 30)");
  experiment("violation-33", "Failure of conditional Jensen",
             [&] { return violation_33_search(ex.config()); });
  experiment("decompose", "Atomic decomposition sweep",
             [&] { return decomposition_sweep(ex.config()); });

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.emplace_back("varhardy");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (!action) throw ValidationError("no command selected");
    write_output(action(), common, command, out);
    return 0;
  } catch (const ResourceError& e) {
    err << "resource error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << " (bracket " << e.lo() << ", " << e.hi() << ")\n";
    return 3;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace varhardy::cli
