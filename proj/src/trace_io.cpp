#include "ctpd/trace_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ctpd/error.hpp"

namespace ctpd {

namespace {

const ordered_json &member(const ordered_json &obj, const char *key,
                           std::size_t line) {
  if (!obj.is_object())
    throw ParseError(line, std::string("expected an object holding '") + key + "'");
  auto it = obj.find(key);
  if (it == obj.end())
    throw ParseError(line, std::string("missing field '") + key + "'");
  return *it;
}

std::string string_field(const ordered_json &obj, const char *key,
                         std::size_t line) {
  const auto &v = member(obj, key, line);
  if (!v.is_string())
    throw ParseError(line, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<ByteSpan> parse_offsets(const ordered_json &v, std::size_t line) {
  if (!v.is_array())
    throw ParseError(line, "token offsets must be an array");
  std::vector<ByteSpan> out;
  out.reserve(v.size());
  for (const auto &pair : v) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_unsigned() ||
        !pair[1].is_number_unsigned())
      throw ParseError(line, "each token must be a [start, end] pair of byte offsets");
    out.push_back({pair[0].get<std::size_t>(), pair[1].get<std::size_t>()});
  }
  return out;
}

ResponseBundle parse_bundle(const ordered_json &obj, std::size_t line) {
  ResponseBundle bundle;
  const std::string text = string_field(obj, "text", line);
  const auto &tokens = member(obj, "tokens", line);
  bundle.teacher_trace = {Utf8Doc{text}, std::string(kTeacherSide),
                          parse_offsets(member(tokens, "teacher", line), line)};
  bundle.student_trace = {Utf8Doc{text}, std::string(kStudentSide),
                          parse_offsets(member(tokens, "student", line), line)};

  if (auto it = obj.find("logprobs"); it != obj.end()) {
    if (!it->is_object())
      throw ParseError(line, "'logprobs' must be an object");
    for (const auto &[role, body] : it->items()) {
      LogProbTrack track;
      track.role = TrackRole::from_name(role);
      track.tokenizer_id = string_field(body, "tokenizer", line);
      if (track.tokenizer_id != kTeacherSide && track.tokenizer_id != kStudentSide)
        throw ParseError(line, "track '" + role +
                                   "' tokenizer must be \"teacher\" or \"student\"");
      const auto &values = member(body, "values", line);
      if (!values.is_array())
        throw ParseError(line, "track '" + role + "' values must be an array");
      track.values.reserve(values.size());
      for (const auto &x : values) {
        if (!x.is_number())
          throw ParseError(line, "track '" + role + "' holds a non-number");
        track.values.push_back(x.get<double>());
      }
      bundle.tracks.push_back(std::move(track));
    }
  }

  if (auto it = obj.find("span_weights"); it != obj.end()) {
    if (!it->is_array())
      throw ParseError(line, "'span_weights' must be an array");
    std::vector<double> weights;
    for (const auto &x : *it) {
      if (!x.is_number())
        throw ParseError(line, "'span_weights' holds a non-number");
      weights.push_back(x.get<double>());
    }
    bundle.span_weights = std::move(weights);
  }
  return bundle;
}

ordered_json offsets_json(const std::vector<ByteSpan> &tokens) {
  auto arr = ordered_json::array();
  for (const auto &t : tokens)
    arr.push_back({t.start, t.end});
  return arr;
}

ordered_json bundle_json(const ResponseBundle &bundle) {
  ordered_json out;
  out["text"] = bundle.text();
  out["tokens"]["teacher"] = offsets_json(bundle.teacher_trace.tokens);
  out["tokens"]["student"] = offsets_json(bundle.student_trace.tokens);
  auto lps = ordered_json::object();
  for (const auto &t : bundle.tracks) {
    ordered_json body;
    body["tokenizer"] = t.tokenizer_id;
    body["values"] = t.values;
    lps[t.role.name()] = std::move(body);
  }
  out["logprobs"] = std::move(lps);
  if (bundle.span_weights)
    out["span_weights"] = *bundle.span_weights;
  return out;
}

} // namespace

PreferenceExample parse_example_unchecked(std::string_view line_text,
                                          std::size_t line) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(line_text);
  } catch (const nlohmann::json::parse_error &e) {
    throw ParseError(line, e.what());
  }
  if (!doc.is_object())
    throw ParseError(line, "record must be a JSON object");
  PreferenceExample ex;
  ex.line = line;
  ex.prompt = Utf8Doc{string_field(doc, "prompt", line)};
  try {
    ex.chosen = parse_bundle(member(doc, "chosen", line), line);
    ex.rejected = parse_bundle(member(doc, "rejected", line), line);
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(line, e.what());
  }
  return ex;
}

PreferenceExample parse_example(std::string_view line_text, std::size_t line) {
  PreferenceExample ex = parse_example_unchecked(line_text, line);
  require_valid(ex);
  return ex;
}

std::vector<PreferenceExample> read_examples(std::istream &in,
                                             std::string_view schema_version) {
  if (schema_version != kSchemaVersion)
    throw std::invalid_argument("unsupported schema version '" +
                                std::string(schema_version) + "'");
  std::vector<PreferenceExample> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    out.push_back(parse_example(text, line));
  }
  return out;
}

std::vector<PreferenceExample> load_examples(const std::filesystem::path &path,
                                             std::string_view schema_version) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open '" + path.string() + "'");
  return read_examples(in, schema_version);
}

ordered_json to_json(const PreferenceExample &example) {
  ordered_json out;
  out["prompt"] = example.prompt.text;
  out["chosen"] = bundle_json(example.chosen);
  out["rejected"] = bundle_json(example.rejected);
  return out;
}

ordered_json to_json(const AlignedPartition &partition) {
  auto spans = ordered_json::array();
  for (const auto &s : partition.spans) {
    ordered_json j;
    j["s"] = s.byte_start;
    j["e"] = s.byte_end;
    j["t"] = {s.teacher_tokens.begin, s.teacher_tokens.end};
    j["u"] = {s.student_tokens.begin, s.student_tokens.end};
    spans.push_back(std::move(j));
  }
  ordered_json out;
  out["spans"] = std::move(spans);
  return out;
}

std::string serialize_examples(const std::vector<PreferenceExample> &examples) {
  std::ostringstream os;
  for (const auto &ex : examples)
    os << to_json(ex).dump() << '\n';
  return os.str();
}

void write_examples(const std::filesystem::path &path,
                    const std::vector<PreferenceExample> &examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write '" + path.string() + "'");
  out << serialize_examples(examples);
}

} // namespace ctpd
