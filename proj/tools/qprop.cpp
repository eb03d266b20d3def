#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qprop/metric.hpp"
#include "qprop/serialize.hpp"
#include "qprop/verify.hpp"

namespace {

using namespace qprop;

std::string read_text(const std::string& path) {
  if (path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_out(const std::string& out_path, const Json& doc) {
  const std::string text = dump_json(doc);
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw parse_error("cannot write '" + out_path + "'");
  out << text;
}

Int int_from_token(std::string tok) {
  const auto first = tok.find_first_not_of(" \t");
  const auto last = tok.find_last_not_of(" \t");
  if (first == std::string::npos) throw parse_error("empty integer token");
  tok = tok.substr(first, last - first + 1);
  try {
    return Int(tok);
  } catch (const std::exception&) {
    throw parse_error("malformed integer '" + tok + "'");
  }
}

std::vector<Int> parse_int_list(const std::string& text) {
  std::vector<Int> out;
  std::istringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(int_from_token(tok));
  if (out.empty()) throw parse_error("expected a comma-separated integer list");
  return out;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& cli_seed) {
  if (cli_seed) return *cli_seed;
  if (const char* env = std::getenv("QPROP_SEED")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || (end && *end != '\0'))
      throw parse_error("QPROP_SEED is not an unsigned integer");
    return static_cast<std::uint64_t>(v);
  }
  return 0;
}

const Json& need(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    throw parse_error(std::string("missing field '") + key + "'");
  return j.at(key);
}

LipKind kind_from_text(const std::string& text) {
  if (text == "cond-exp") return LipKind::cond_exp;
  if (text == "quotient") return LipKind::quotient;
  throw parse_error("kind must be 'cond-exp' or 'quotient'");
}

LipSpec build_es_spec(const ContinuedFraction& cf, std::size_t level, LipKind kind) {
  Tower t = effros_shen_tower(cf, level);
  TraceWeights w = effros_shen_trace(cf, level).weights;
  std::vector<Rat> beta = effros_shen_beta(cf, level);
  return make_lip_spec(std::move(t), level, kind, std::move(w), std::move(beta));
}

LipSpec load_spec(const std::string& path) {
  return lip_spec_from_json(open_document(read_text(path), "lip-spec"));
}

BlockElement random_sa_element(const AlgebraShape& s, CounterRng& rng) {
  BlockElement x = BlockElement::zero(s);
  std::vector<std::size_t> dims = s.dense_dims();
  for (std::size_t k = 0; k < dims.size(); ++k)
    for (std::size_t i = 0; i < dims[k]; ++i)
      for (std::size_t j = 0; j < dims[k]; ++j)
        x.blocks[k](i, j) = cx(rng.gaussian(), rng.gaussian());
  return sa_projection(x);
}

FusingFamily family_from_json(const Json& j) {
  FusingFamily f;
  const Json& jm = need(j, "members");
  if (!jm.is_array()) throw parse_error("family members must be an array");
  for (const Json& m : jm) f.members.push_back(lip_spec_from_json(m));
  f.limit = lip_spec_from_json(need(j, "limit"));
  const Json& jd = need(j, "dominator");
  if (!jd.is_array()) throw parse_error("family dominator must be an array");
  for (const Json& b : jd) f.dominator.push_back(rat_from_json(b));
  return f;
}

int emit_error(const std::string& type, const std::string& message, int code) {
  Json data;
  data["type"] = type;
  data["message"] = message;
  std::cout << dump_json(make_document("error", std::move(data)));
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bratteli-tower Lip-norm and propinquity toolkit"};
  app.require_subcommand(1);

  std::string out_path;
  std::string cf_text, mult_text, kind_text = "cond-exp";
  std::string spec_path, element_path, tower_path, weights_path;
  std::string phi_path, psi_path, member_path, limit_path, family_path;
  std::string map_path, u_path, v_path;
  std::size_t depth = 3, level = 1, mlevel = 1, nlevel = 2, member_idx = 0;
  std::size_t from_level = 1, onto_level = 0;
  std::size_t samples = 200, sphere = 32, partners = 32, member_count = 6;
  std::uint64_t tail = 2;
  double tol = 1e-8;
  std::optional<std::uint64_t> seed_opt;
  bool want_exact = false;
  int exit_code = 0;

  auto add_out = [&](CLI::App* sub) {
    sub->add_option("--out", out_path, "output file ('-' or empty = stdout)");
  };
  auto add_seed = [&](CLI::App* sub) {
    sub->add_option("--seed", seed_opt, "deterministic seed (falls back to QPROP_SEED, then 0)");
  };

  // ---- tower ---------------------------------------------------------------
  CLI::App* tower = app.add_subcommand("tower", "build inductive towers");
  tower->require_subcommand(1);
  CLI::App* tower_es = tower->add_subcommand("effros-shen", "tower of a continued fraction");
  tower_es->add_option("--cf", cf_text, "quotients, e.g. 0,1,1,1")->required();
  tower_es->add_option("--depth", depth, "number of steps")->required();
  add_out(tower_es);
  tower_es->callback([&] {
    ContinuedFraction cf = make_cf(parse_int_list(cf_text));
    Json data;
    data["tower"] = json_of(effros_shen_tower(cf, depth));
    Json beta = Json::array();
    for (const Rat& b : effros_shen_beta(cf, depth)) beta.push_back(json_of(b));
    data["beta"] = std::move(beta);
    write_out(out_path, make_document("tower", std::move(data)));
  });
  CLI::App* tower_uhf = tower->add_subcommand("uhf", "tower of a multiplier sequence");
  tower_uhf->add_option("--multipliers", mult_text, "e.g. 2,3,4")->required();
  add_out(tower_uhf);
  tower_uhf->callback([&] {
    Json data;
    data["tower"] = json_of(uhf_tower(parse_int_list(mult_text)));
    write_out(out_path, make_document("tower", std::move(data)));
  });

  // ---- trace ---------------------------------------------------------------
  CLI::App* trace = app.add_subcommand("trace", "tracial states");
  trace->require_subcommand(1);
  CLI::App* trace_es = trace->add_subcommand("effros-shen", "certified trace weights at a level");
  trace_es->add_option("--cf", cf_text, "quotients")->required();
  trace_es->add_option("--level", level, "tower level")->required();
  add_out(trace_es);
  trace_es->callback([&] {
    ContinuedFraction cf = make_cf(parse_int_list(cf_text));
    write_out(out_path, make_document("trace-effros-shen", json_of(effros_shen_trace(cf, level))));
  });
  CLI::App* trace_pb = trace->add_subcommand("pullback", "pull a trace back along the tower");
  trace_pb->add_option("--tower", tower_path, "tower document")->required();
  trace_pb->add_option("--weights", weights_path, "trace document at --from")->required();
  trace_pb->add_option("--from", from_level, "level the weights live on")->required();
  trace_pb->add_option("--onto", onto_level, "target level")->required();
  add_out(trace_pb);
  trace_pb->callback([&] {
    Tower t = tower_from_json(need(open_document(read_text(tower_path), "tower"), "tower"));
    TraceWeights w = trace_from_json(open_document(read_text(weights_path), "trace"));
    TraceWeights pulled = pullback_trace(compose_steps(t, onto_level, from_level), w);
    write_out(out_path, make_document("trace", json_of(pulled)));
  });

  // ---- spec ----------------------------------------------------------------
  CLI::App* spec_cmd = app.add_subcommand("spec", "assemble Lip-norm specs");
  spec_cmd->require_subcommand(1);
  CLI::App* spec_es = spec_cmd->add_subcommand("effros-shen", "spec with certified trace and "
                                               "default weights");
  spec_es->add_option("--cf", cf_text, "quotients")->required();
  spec_es->add_option("--level", level, "top level")->required();
  spec_es->add_option("--kind", kind_text, "cond-exp | quotient");
  add_out(spec_es);
  spec_es->callback([&] {
    ContinuedFraction cf = make_cf(parse_int_list(cf_text));
    LipSpec spec = build_es_spec(cf, level, kind_from_text(kind_text));
    write_out(out_path, make_document("lip-spec", json_of(spec)));
  });

  // ---- element ---------------------------------------------------------------
  CLI::App* element = app.add_subcommand("element", "elements of the top level");
  element->require_subcommand(1);
  CLI::App* element_rnd = element->add_subcommand("random", "random self-adjoint element");
  element_rnd->add_option("--spec", spec_path, "lip-spec document")->required();
  add_seed(element_rnd);
  add_out(element_rnd);
  element_rnd->callback([&] {
    LipSpec spec = load_spec(spec_path);
    CounterRng rng(resolve_seed(seed_opt), 31);
    BlockElement x = random_sa_element(spec.tower.levels[spec.level], rng);
    write_out(out_path, make_document("element", json_of(x)));
  });

  // ---- lipnorm ---------------------------------------------------------------
  CLI::App* lipnorm = app.add_subcommand("lipnorm", "evaluate the Lip-norm of an element");
  lipnorm->add_option("--spec", spec_path, "lip-spec document")->required();
  lipnorm->add_option("--element", element_path, "element document")->required();
  add_out(lipnorm);
  lipnorm->callback([&] {
    LipEvaluator eval(load_spec(spec_path));
    BlockElement x = element_from_json(open_document(read_text(element_path), "element"));
    write_out(out_path, make_document("lip-value", json_of(eval.value(x))));
  });

  // ---- quotient ----------------------------------------------------------------
  CLI::App* quotient = app.add_subcommand("quotient", "certified distance to a level image");
  quotient->add_option("--spec", spec_path, "lip-spec document (quotient kind)")->required();
  quotient->add_option("--element", element_path, "element document")->required();
  quotient->add_option("--level", mlevel, "image level m")->required();
  add_out(quotient);
  quotient->callback([&] {
    LipEvaluator eval(load_spec(spec_path));
    BlockElement x = element_from_json(open_document(read_text(element_path), "element"));
    write_out(out_path, make_document("quotient-result", json_of(eval.quotient_term(mlevel, x))));
  });

  // ---- kantorovich ---------------------------------------------------------------
  CLI::App* kant = app.add_subcommand("kantorovich", "Monge-Kantorovich distance of two states");
  kant->add_option("--spec", spec_path, "lip-spec document")->required();
  kant->add_option("--phi", phi_path, "trace document")->required();
  kant->add_option("--psi", psi_path, "trace document")->required();
  kant->add_option("--samples", samples, "estimator sample count");
  kant->add_flag("--exact", want_exact, "also solve the exact LP (all-scalar towers)");
  add_seed(kant);
  add_out(kant);
  kant->callback([&] {
    LipEvaluator eval(load_spec(spec_path));
    TraceWeights phi = trace_from_json(open_document(read_text(phi_path), "trace"));
    TraceWeights psi = trace_from_json(open_document(read_text(psi_path), "trace"));
    Json data;
    data["estimate"] =
        json_of(kantorovich_lower_bound(eval, phi, psi, samples, resolve_seed(seed_opt)));
    data["diameter_bound"] = json_of(diameter_upper_bound(eval.spec()));
    if (want_exact) data["exact"] = json_of(kantorovich_commutative_exact(eval, phi, psi));
    write_out(out_path, make_document("kantorovich", std::move(data)));
  });

  // ---- propinquity ---------------------------------------------------------------
  CLI::App* prop = app.add_subcommand("propinquity", "certified propinquity bounds");
  prop->require_subcommand(1);
  CLI::App* prop_beta = prop->add_subcommand("beta-bound", "truncation bridge certificate");
  prop_beta->add_option("--spec", spec_path, "lip-spec document (cond-exp kind)")->required();
  prop_beta->add_option("--level", mlevel, "truncation level m")->required();
  prop_beta->add_option("--samples", samples, "Lip-ball sample count");
  add_seed(prop_beta);
  add_out(prop_beta);
  prop_beta->callback([&] {
    LipEvaluator eval(load_spec(spec_path));
    BetaBoundCertificate cert =
        beta_bound_certificate(eval, mlevel, samples, resolve_seed(seed_opt));
    write_out(out_path, make_document("beta-bound", json_of(cert)));
    if (!cert.verified) exit_code = 2;
  });
  CLI::App* prop_rescale = prop->add_subcommand("rescale", "two-norm rescaling bound");
  prop_rescale->add_option("--member", member_path, "lip-spec document")->required();
  prop_rescale->add_option("--limit", limit_path, "lip-spec document")->required();
  prop_rescale->add_option("--sphere", sphere, "sphere sample count");
  prop_rescale->add_option("--partners", partners, "partner recheck count");
  add_seed(prop_rescale);
  add_out(prop_rescale);
  prop_rescale->callback([&] {
    LipEvaluator member(load_spec(member_path));
    LipEvaluator limit(load_spec(limit_path));
    RescaleBound cert =
        rescaling_bridge_bound(member, limit, sphere, partners, resolve_seed(seed_opt));
    write_out(out_path, make_document("rescale-bound", json_of(cert)));
    if (!cert.verified) exit_code = 2;
  });
  CLI::App* prop_chain = prop->add_subcommand("chain", "fusing-chain propinquity bound");
  prop_chain->add_option("--family", family_path, "family document")->required();
  prop_chain->add_option("--level", nlevel, "truncation level N")->required();
  prop_chain->add_option("--member", member_idx, "member index k")->required();
  prop_chain->add_option("--sphere", sphere, "sphere sample count");
  add_seed(prop_chain);
  add_out(prop_chain);
  prop_chain->callback([&] {
    FusingFamily family = family_from_json(open_document(read_text(family_path), "family"));
    ChainBound bound =
        propinquity_chain_bound(family, nlevel, member_idx, sphere, resolve_seed(seed_opt));
    write_out(out_path, make_document("chain-bound", json_of(bound)));
    if (!bound.verified) exit_code = 2;
  });

  // ---- family ---------------------------------------------------------------
  CLI::App* family_cmd = app.add_subcommand("family", "assemble fusing families");
  family_cmd->require_subcommand(1);
  CLI::App* family_es = family_cmd->add_subcommand(
      "effros-shen", "members follow the limit quotients through k, then a constant tail");
  family_es->add_option("--cf", cf_text, "limit quotients (length >= level+3)")->required();
  family_es->add_option("--members", member_count, "number of members");
  family_es->add_option("--level", nlevel, "spec level N")->required();
  family_es->add_option("--kind", kind_text, "cond-exp | quotient");
  family_es->add_option("--tail", tail, "constant tail quotient (>= 1)");
  add_out(family_es);
  family_es->callback([&] {
    if (tail < 1) throw domain_error("tail quotient must be at least 1");
    ContinuedFraction limit_cf = make_cf(parse_int_list(cf_text));
    LipKind kind = kind_from_text(kind_text);
    const std::size_t len = limit_cf.quotients.size();
    if (len < nlevel + 3)
      throw domain_error("limit continued fraction too short for certified traces");
    Json members = Json::array();
    std::vector<LipSpec> specs;
    for (std::size_t k = 0; k < member_count; ++k) {
      std::vector<Int> qs{Int(0)};
      for (std::size_t j = 1; j < len; ++j)
        qs.push_back(j <= k ? limit_cf.quotients[j] : Int(tail));
      specs.push_back(build_es_spec(make_cf(std::move(qs)), nlevel, kind));
      members.push_back(json_of(specs.back()));
    }
    LipSpec limit_spec = build_es_spec(limit_cf, nlevel, kind);
    Json dominator = Json::array();
    for (std::size_t n = 0; n <= nlevel; ++n) {
      Rat best = limit_spec.beta[n];
      for (const LipSpec& s : specs) best = std::max(best, s.beta[n]);
      dominator.push_back(json_of(best));
    }
    Json data;
    data["members"] = std::move(members);
    data["limit"] = json_of(limit_spec);
    data["dominator"] = std::move(dominator);
    write_out(out_path, make_document("family", std::move(data)));
  });

  // ---- isometry ---------------------------------------------------------------
  CLI::App* iso = app.add_subcommand("isometry", "quantum isometry certificates");
  iso->require_subcommand(1);
  CLI::App* iso_verify = iso->add_subcommand("verify", "check a block relabeling");
  iso_verify->add_option("--map", map_path, "isometry-map document")->required();
  iso_verify->add_option("--u", u_path, "source lip-spec document")->required();
  iso_verify->add_option("--v", v_path, "target lip-spec document")->required();
  iso_verify->add_option("--samples", samples, "Lip-ball sample count");
  iso_verify->add_option("--tol", tol, "deviation tolerance (loosen-only, >= 1e-8)");
  add_seed(iso_verify);
  add_out(iso_verify);
  iso_verify->callback([&] {
    IsometryMap map = isometry_from_json(open_document(read_text(map_path), "isometry-map"));
    LipEvaluator u(load_spec(u_path));
    LipEvaluator v(load_spec(v_path));
    IsometryCertificate cert =
        verify_quantum_isometry(map, u, v, samples, resolve_seed(seed_opt), tol);
    write_out(out_path, make_document("isometry-certificate", json_of(cert)));
    if (!cert.verified) exit_code = 2;
  });

  // ---- verify-suite ---------------------------------------------------------------
  CLI::App* suite = app.add_subcommand("verify-suite", "deterministic invariant battery");
  add_seed(suite);
  add_out(suite);
  suite->callback([&] {
    Report rep = run_verify_suite(resolve_seed(seed_opt));
    write_out(out_path, make_document("verify-suite", json_of(rep)));
    if (!rep.all_passed()) exit_code = 2;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const parse_error& e) {
    return emit_error("parse", e.what(), 1);
  } catch (const shape_error& e) {
    return emit_error("shape", e.what(), 1);
  } catch (const domain_error& e) {
    return emit_error("domain", e.what(), 1);
  } catch (const hypothesis_error& e) {
    return emit_error("hypothesis", e.what(), 2);
  } catch (const precision_error& e) {
    return emit_error("precision", e.what(), 2);
  } catch (const std::exception& e) {
    return emit_error("internal", e.what(), 1);
  }
  return exit_code;
}
