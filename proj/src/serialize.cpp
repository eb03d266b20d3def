#include "qprop/serialize.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>

#include "qprop/errors.hpp"

namespace qprop {

namespace {

const Json& get_field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    throw parse_error(std::string("missing field '") + key + "'");
  return j.at(key);
}

std::size_t size_from_json(const Json& j, const char* what) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
    throw parse_error(std::string(what) + " must be a nonnegative integer");
  return j.get<std::size_t>();
}

}  // namespace

Json json_of(double x) {
  if (std::isnan(x)) return Json("nan");
  if (std::isinf(x)) return Json(x > 0 ? "inf" : "-inf");
  return Json(x);
}

Json json_of(const Int& x) {
  if (x >= std::numeric_limits<std::int64_t>::min() &&
      x <= std::numeric_limits<std::int64_t>::max())
    return Json(x.convert_to<std::int64_t>());
  return Json(x.str());
}

Json json_of(const Rat& x) { return Json(rat_to_string(x)); }

Json json_of(cx z) { return Json::array({json_of(z.real()), json_of(z.imag())}); }

double double_from_json(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string& s = j.get_ref<const std::string&>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw parse_error("expected a real number");
}

Int int_from_json(const Json& j) {
  if (j.is_number_integer() || j.is_number_unsigned()) {
    if (j.is_number_unsigned()) return Int(j.get<std::uint64_t>());
    return Int(j.get<std::int64_t>());
  }
  if (j.is_string()) {
    try {
      return Int(j.get_ref<const std::string&>());
    } catch (const std::exception&) {
      throw parse_error("malformed integer string");
    }
  }
  throw parse_error("expected an integer (number or decimal string)");
}

Rat rat_from_json(const Json& j) {
  if (j.is_number_integer() || j.is_number_unsigned()) return Rat(int_from_json(j));
  if (j.is_string()) return rat_from_string(j.get_ref<const std::string&>());
  throw parse_error("expected a rational ('p/q' string or integer)");
}

cx cx_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw parse_error("expected [re, im]");
  return cx(double_from_json(j[0]), double_from_json(j[1]));
}

Json json_of(const AlgebraShape& s) {
  Json a = Json::array();
  for (const Int& d : s.dims) a.push_back(json_of(d));
  return a;
}

AlgebraShape shape_from_json(const Json& j) {
  if (!j.is_array()) throw parse_error("shape must be an array of dimensions");
  std::vector<Int> dims;
  for (const Json& d : j) dims.push_back(int_from_json(d));
  return make_shape(std::move(dims));
}

Json json_of(const MultiplicityEmbedding& e) {
  Json rows = Json::array();
  for (std::size_t j = 0; j < e.out_shape.blocks(); ++j) {
    Json row = Json::array();
    for (std::size_t i = 0; i < e.in_shape.blocks(); ++i) row.push_back(json_of(e.at(j, i)));
    rows.push_back(std::move(row));
  }
  Json out;
  out["in"] = json_of(e.in_shape);
  out["out"] = json_of(e.out_shape);
  out["mult"] = std::move(rows);
  return out;
}

MultiplicityEmbedding embedding_from_json(const Json& j) {
  AlgebraShape in = shape_from_json(get_field(j, "in"));
  AlgebraShape out = shape_from_json(get_field(j, "out"));
  const Json& rows = get_field(j, "mult");
  if (!rows.is_array()) throw parse_error("mult must be an array of rows");
  std::vector<Int> mult;
  for (const Json& row : rows) {
    if (!row.is_array()) throw parse_error("mult rows must be arrays");
    for (const Json& v : row) mult.push_back(int_from_json(v));
  }
  return make_embedding(std::move(in), std::move(out), std::move(mult));
}

Json json_of(const Tower& t) {
  Json levels = Json::array();
  for (const AlgebraShape& s : t.levels) levels.push_back(json_of(s));
  Json steps = Json::array();
  for (const MultiplicityEmbedding& e : t.steps) steps.push_back(json_of(e));
  Json out;
  out["label"] = t.label;
  out["levels"] = std::move(levels);
  out["steps"] = std::move(steps);
  return out;
}

Tower tower_from_json(const Json& j) {
  const Json& jl = get_field(j, "levels");
  const Json& js = get_field(j, "steps");
  if (!jl.is_array() || !js.is_array()) throw parse_error("tower levels/steps must be arrays");
  std::vector<AlgebraShape> levels;
  for (const Json& s : jl) levels.push_back(shape_from_json(s));
  std::vector<MultiplicityEmbedding> steps;
  for (const Json& e : js) steps.push_back(embedding_from_json(e));
  std::string label = j.value("label", "");
  return make_tower(std::move(levels), std::move(steps), std::move(label));
}

Json json_of(const ContinuedFraction& cf) {
  Json a = Json::array();
  for (const Int& q : cf.quotients) a.push_back(json_of(q));
  return a;
}

ContinuedFraction cf_from_json(const Json& j) {
  if (!j.is_array()) throw parse_error("continued fraction must be an array of quotients");
  std::vector<Int> qs;
  for (const Json& q : j) qs.push_back(int_from_json(q));
  return make_cf(std::move(qs));
}

Json json_of(const Convergents& c) {
  Json p = Json::array(), q = Json::array();
  for (const Int& v : c.p) p.push_back(json_of(v));
  for (const Int& v : c.q) q.push_back(json_of(v));
  Json out;
  out["p"] = std::move(p);
  out["q"] = std::move(q);
  return out;
}

Json json_of(const RatInterval& iv) {
  Json out;
  out["lo"] = json_of(iv.lo);
  out["hi"] = json_of(iv.hi);
  return out;
}

Json json_of(const BaireResult& b) {
  Json out;
  switch (b.kind) {
    case BaireKind::equal: out["kind"] = "equal"; break;
    case BaireKind::distinct: out["kind"] = "distinct"; break;
    case BaireKind::indistinguishable: out["kind"] = "indistinguishable"; break;
  }
  out["distance"] = json_of(b.distance);
  out["depth"] = b.depth;
  return out;
}

Json json_of(const TraceWeights& w) {
  Json lam = Json::array();
  for (double v : w.lambda) lam.push_back(json_of(v));
  Json out;
  out["dims"] = json_of(w.shape);
  out["lambda"] = std::move(lam);
  return out;
}

TraceWeights trace_from_json(const Json& j) {
  AlgebraShape shape = shape_from_json(get_field(j, "dims"));
  const Json& jl = get_field(j, "lambda");
  if (!jl.is_array()) throw parse_error("lambda must be an array");
  std::vector<double> lam;
  for (const Json& v : jl) lam.push_back(double_from_json(v));
  return make_trace(std::move(shape), std::move(lam));
}

Json json_of(const EffrosShenTrace& t) {
  Json out;
  out["weights"] = json_of(t.weights);
  out["t_mid"] = json_of(t.t_mid);
  out["t_range"] = json_of(t.t_range);
  out["half_width"] = json_of(t.half_width);
  return out;
}

Json json_of(const CMatrix& m) {
  Json entries = Json::array();
  for (std::size_t i = 0; i < m.dim(); ++i)
    for (std::size_t k = 0; k < m.dim(); ++k) entries.push_back(json_of(m(i, k)));
  Json out;
  out["dim"] = m.dim();
  out["entries"] = std::move(entries);
  return out;
}

CMatrix matrix_from_json(const Json& j) {
  std::size_t n = size_from_json(get_field(j, "dim"), "matrix dim");
  const Json& entries = get_field(j, "entries");
  if (!entries.is_array() || entries.size() != n * n)
    throw parse_error("matrix entries must hold dim*dim pairs");
  CMatrix m(n);
  std::size_t idx = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) m(i, k) = cx_from_json(entries[idx++]);
  return m;
}

Json json_of(const BlockElement& x) {
  Json blocks = Json::array();
  for (const CMatrix& b : x.blocks) blocks.push_back(json_of(b));
  Json out;
  out["shape"] = json_of(x.shape);
  out["blocks"] = std::move(blocks);
  return out;
}

BlockElement element_from_json(const Json& j) {
  AlgebraShape shape = shape_from_json(get_field(j, "shape"));
  const Json& jb = get_field(j, "blocks");
  if (!jb.is_array() || jb.size() != shape.blocks())
    throw parse_error("element needs one matrix per block");
  std::vector<std::size_t> dims = shape.dense_dims();
  BlockElement x = BlockElement::zero(shape);
  for (std::size_t k = 0; k < shape.blocks(); ++k) {
    CMatrix m = matrix_from_json(jb[k]);
    if (m.dim() != dims[k]) throw parse_error("element block dimension mismatch");
    x.blocks[k] = std::move(m);
  }
  return x;
}

Json json_of(const LipSpec& spec) {
  Json out;
  out["tower"] = json_of(spec.tower);
  out["level"] = spec.level;
  out["kind"] = spec.kind == LipKind::cond_exp ? "cond-exp" : "quotient";
  out["trace"] = spec.trace ? json_of(*spec.trace) : Json(nullptr);
  Json beta = Json::array();
  for (const Rat& b : spec.beta) beta.push_back(json_of(b));
  out["beta"] = std::move(beta);
  return out;
}

LipSpec lip_spec_from_json(const Json& j) {
  Tower tower = tower_from_json(get_field(j, "tower"));
  std::size_t level = size_from_json(get_field(j, "level"), "level");
  const Json& jk = get_field(j, "kind");
  LipKind kind;
  if (jk == "cond-exp")
    kind = LipKind::cond_exp;
  else if (jk == "quotient")
    kind = LipKind::quotient;
  else
    throw parse_error("kind must be 'cond-exp' or 'quotient'");
  std::optional<TraceWeights> trace;
  if (j.contains("trace") && !j.at("trace").is_null()) trace = trace_from_json(j.at("trace"));
  const Json& jb = get_field(j, "beta");
  if (!jb.is_array()) throw parse_error("beta must be an array of rationals");
  std::vector<Rat> beta;
  for (const Json& b : jb) beta.push_back(rat_from_json(b));
  return make_lip_spec(std::move(tower), level, kind, std::move(trace), std::move(beta));
}

Json json_of(const LipValue& v) {
  Json out;
  out["lower"] = json_of(v.lower);
  out["upper"] = json_of(v.upper);
  out["converged"] = v.converged;
  return out;
}

Json json_of(const QuotientResult& q) {
  Json out;
  out["value"] = json_of(q.value);
  out["lower"] = json_of(q.lower);
  out["converged"] = q.converged;
  out["rel_gap"] = json_of(q.rel_gap);
  out["iterations"] = q.iterations;
  out["witness"] = json_of(q.witness);
  return out;
}

Json json_of(const LeibnizReport& r) {
  Json out;
  out["passed"] = r.passed;
  out["worst_margin"] = json_of(r.worst_margin);
  out["pairs"] = r.pairs;
  out["failures"] = r.failures;
  return out;
}

Json json_of(const KantorovichExact& k) {
  Json pot = Json::array();
  for (double v : k.potential) pot.push_back(json_of(v));
  Json out;
  out["value"] = json_of(k.value);
  out["potential"] = std::move(pot);
  return out;
}

Json json_of(const KantorovichEstimate& k) {
  Json out;
  out["value"] = json_of(k.value);
  out["samples"] = k.samples;
  out["seed"] = k.seed;
  out["witness"] = json_of(k.witness);
  return out;
}

Json json_of(const BetaBoundCertificate& c) {
  Json out;
  out["level_m"] = c.level_m;
  out["claimed"] = json_of(c.claimed);
  out["samples"] = c.samples;
  out["seed"] = c.seed;
  out["worst_ball_residual"] = json_of(c.worst_ball_residual);
  out["worst_norm_residual"] = json_of(c.worst_norm_residual);
  out["tolerance"] = json_of(c.tolerance);
  out["verified"] = c.verified;
  return out;
}

Json json_of(const RescaleBound& c) {
  Json out;
  out["m_s"] = json_of(c.m_s);
  out["eps"] = json_of(c.eps);
  out["sphere_samples"] = c.sphere_samples;
  out["partner_samples"] = c.partner_samples;
  out["seed"] = c.seed;
  out["worst_distance_margin"] = json_of(c.worst_distance_margin);
  out["worst_lip_margin"] = json_of(c.worst_lip_margin);
  out["tolerance"] = json_of(c.tolerance);
  out["verified"] = c.verified;
  out["empirical"] = c.empirical;
  return out;
}

Json json_of(const ChainLevelTerm& t) {
  Json out;
  out["level"] = t.level;
  out["two_b"] = json_of(t.two_b);
  out["bridge"] = json_of(t.bridge);
  out["total"] = json_of(t.total);
  return out;
}

Json json_of(const ChainBound& c) {
  Json per = Json::array();
  for (const ChainLevelTerm& t : c.per_level) per.push_back(json_of(t));
  Json out;
  out["level"] = c.level;
  out["member"] = c.member;
  out["c_n"] = c.c_n;
  out["two_b"] = json_of(c.two_b);
  out["bridge"] = json_of(c.bridge);
  out["total"] = json_of(c.total);
  out["trace_distance"] = json_of(c.trace_distance);
  out["per_level"] = std::move(per);
  out["verified"] = c.verified;
  return out;
}

Json json_of(const IsometryMap& m) {
  Json perms = Json::array();
  for (const auto& p : m.perms) {
    Json row = Json::array();
    for (std::size_t v : p) row.push_back(v);
    perms.push_back(std::move(row));
  }
  Json out;
  out["perms"] = std::move(perms);
  if (!m.top_unitaries.empty()) {
    Json us = Json::array();
    for (const CMatrix& u : m.top_unitaries) us.push_back(json_of(u));
    out["top_unitaries"] = std::move(us);
  }
  return out;
}

IsometryMap isometry_from_json(const Json& j) {
  const Json& jp = get_field(j, "perms");
  if (!jp.is_array()) throw parse_error("perms must be an array of arrays");
  IsometryMap m;
  for (const Json& row : jp) {
    if (!row.is_array()) throw parse_error("each permutation must be an array");
    std::vector<std::size_t> p;
    for (const Json& v : row) p.push_back(size_from_json(v, "permutation entry"));
    m.perms.push_back(std::move(p));
  }
  if (j.contains("top_unitaries") && !j.at("top_unitaries").is_null()) {
    for (const Json& u : j.at("top_unitaries")) m.top_unitaries.push_back(matrix_from_json(u));
  }
  return m;
}

Json json_of(const IsometryCertificate& c) {
  Json out;
  out["structure_ok"] = c.structure_ok;
  out["beta_ok"] = c.beta_ok;
  out["trace_ok"] = c.trace_ok;
  out["max_deviation"] = json_of(c.max_deviation);
  out["samples"] = c.samples;
  out["seed"] = c.seed;
  out["tolerance"] = json_of(c.tolerance);
  out["failure"] = c.failure;
  out["verified"] = c.verified;
  return out;
}

Json make_document(const std::string& kind, Json data) {
  Json j;
  j["schema"] = kSchemaTag;
  j["kind"] = kind;
  j["data"] = std::move(data);
  return j;
}

Json open_document(const std::string& text, const std::string& expect_kind) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw parse_error(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("schema", "") != kSchemaTag)
    throw parse_error("unsupported document schema (expected 'qprop/1')");
  if (!expect_kind.empty() && j.value("kind", "") != expect_kind)
    throw parse_error("document kind '" + j.value("kind", "") + "' (expected '" + expect_kind +
                      "')");
  if (!j.contains("data")) throw parse_error("document has no data payload");
  return j.at("data");
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace qprop
