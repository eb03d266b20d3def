#pragma once

#include <string>

#include <json.hpp>

#include "qprop/metric.hpp"
#include "qprop/tower.hpp"
#include "qprop/trace.hpp"

namespace qprop {

using Json = nlohmann::json;

// Every document this library writes carries this schema tag; readers reject
// anything else instead of guessing.
inline constexpr const char* kSchemaTag = "qprop/1";

// Scalar encodings: integers stay JSON numbers while they fit in int64 and
// become decimal strings beyond that; rationals are canonical "p/q" strings;
// complex numbers are [re, im]; non-finite doubles are the strings
// "inf", "-inf", "nan" (JSON numbers have no spelling for them).
Json json_of(double x);
Json json_of(const Int& x);
Json json_of(const Rat& x);
Json json_of(cx z);

double double_from_json(const Json& j);
Int int_from_json(const Json& j);
Rat rat_from_json(const Json& j);
cx cx_from_json(const Json& j);

Json json_of(const AlgebraShape& s);
Json json_of(const MultiplicityEmbedding& e);
Json json_of(const Tower& t);
Json json_of(const ContinuedFraction& cf);
Json json_of(const Convergents& c);
Json json_of(const RatInterval& iv);
Json json_of(const BaireResult& b);
Json json_of(const TraceWeights& w);
Json json_of(const EffrosShenTrace& t);
Json json_of(const CMatrix& m);
Json json_of(const BlockElement& x);
Json json_of(const LipSpec& spec);
Json json_of(const LipValue& v);
Json json_of(const QuotientResult& q);
Json json_of(const LeibnizReport& r);
Json json_of(const KantorovichExact& k);
Json json_of(const KantorovichEstimate& k);
Json json_of(const BetaBoundCertificate& c);
Json json_of(const RescaleBound& c);
Json json_of(const ChainLevelTerm& t);
Json json_of(const ChainBound& c);
Json json_of(const IsometryMap& m);
Json json_of(const IsometryCertificate& c);

AlgebraShape shape_from_json(const Json& j);
MultiplicityEmbedding embedding_from_json(const Json& j);
Tower tower_from_json(const Json& j);
ContinuedFraction cf_from_json(const Json& j);
TraceWeights trace_from_json(const Json& j);
CMatrix matrix_from_json(const Json& j);
BlockElement element_from_json(const Json& j);
LipSpec lip_spec_from_json(const Json& j);
IsometryMap isometry_from_json(const Json& j);

// Top-level document wrapper: {"schema": tag, "kind": kind, "data": payload}.
Json make_document(const std::string& kind, Json data);
// Parses text, rejects wrong schema or (when expect_kind nonempty) wrong
// kind, returns the payload.  Throws parse_error with a reason.
Json open_document(const std::string& text, const std::string& expect_kind = "");
// Two-space indented dump with trailing newline; used everywhere so equal
// documents are byte-identical.
std::string dump_json(const Json& j);

}  // namespace qprop
