#include "planexec/backends.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <thread>

#include <httplib.h>

#include "planexec/textutil.hpp"
#include "planexec/trace.hpp"
#include "planexec/util.hpp"

namespace planexec::backend {

namespace {

using nlohmann::json;

constexpr std::string_view kBuiltinPrefix = "builtin:";

const json& require_object_field(const json& payload, const std::string& field,
                                 const std::string& who) {
  if (!payload.is_object()) {
    throw SchemaError(who + " payload must be a JSON object");
  }
  const auto it = payload.find(field);
  if (it == payload.end()) {
    throw SchemaError(who + " missing field " + field);
  }
  return *it;
}

std::string require_string_field(const json& payload, const std::string& field,
                                 const std::string& who) {
  const json& value = require_object_field(payload, field, who);
  if (!value.is_string()) {
    throw SchemaError(who + " field " + field + " must be a string");
  }
  return value.get<std::string>();
}

std::map<std::string, std::string> parse_query(std::string_view query) {
  std::map<std::string, std::string> out;
  std::size_t pos = 0;
  while (pos < query.size()) {
    std::size_t amp = query.find('&', pos);
    if (amp == std::string_view::npos) amp = query.size();
    const std::string_view pair = query.substr(pos, amp - pos);
    const std::size_t eq = pair.find('=');
    if (eq != std::string_view::npos) {
      out.emplace(std::string(pair.substr(0, eq)),
                  std::string(pair.substr(eq + 1)));
    }
    pos = amp + 1;
  }
  return out;
}

/// Canonical, filter-clean trace for the given instruction. Mirrors the
/// result statement into the answer so the consistency check passes.
trace::ReasoningTrace canned_trace(const std::string& instruction,
                                   trace::TaskKind kind) {
  std::string subject = text::collapse_ws(instruction);
  while (!subject.empty() && (subject.back() == '.' || subject.back() == '!')) {
    subject.pop_back();
  }
  trace::ReasoningTrace t;
  t.task_kind = kind;
  t.think.stage1_analysis =
      "The instruction asks for " + subject +
      ". The goal is a single concrete visual outcome.";
  t.think.stage2_reasoning =
      "Translating the request into visible elements and their arrangement.";
  t.think.stage2_result =
      subject + ", rendered in crisp detail under balanced studio lighting";
  t.think.stage3_strategy =
      "State the visual elements directly in one executable prompt.";
  t.answer = *t.think.stage2_result;
  return t;
}

std::string canned_trace_text(const json& request) {
  const std::string instruction =
      request.value("instruction", std::string("a simple scene"));
  trace::TaskKind kind = trace::TaskKind::TextToImage;
  if (request.contains("task_kind") && request["task_kind"].is_string()) {
    kind = trace::task_kind_from_string(request["task_kind"].get<std::string>());
  }
  return trace::render_trace_unchecked(canned_trace(instruction, kind));
}

class MockTransport final : public Transport {
 public:
  explicit MockTransport(std::string script) : script_(std::move(script)) {
    if (script_.rfind(kBuiltinPrefix, 0) == 0) {
      const std::string_view rest =
          std::string_view(script_).substr(kBuiltinPrefix.size());
      const std::size_t q = rest.find('?');
      builtin_ = std::string(rest.substr(0, q));
      if (q != std::string_view::npos) {
        params_ = parse_query(rest.substr(q + 1));
      }
      return;
    }
    try {
      table_ = json::parse(util::read_file(script_));
    } catch (const json::parse_error& e) {
      throw ParseError("mock script " + script_ + ": " + e.what());
    }
    if (!table_.is_object()) {
      throw ParseError("mock script " + script_ + " must be a JSON object");
    }
  }

  json roundtrip(const json& request, const std::string&) override {
    const std::size_t attempt = attempt_index_++;
    if (table_.is_object() && table_.contains("fail_pattern")) {
      const auto& pattern = table_["fail_pattern"];
      if (attempt < pattern.size()) {
        const auto& entry = pattern[attempt];
        const bool fail = entry.is_string() ? entry.get<std::string>() == "fail"
                                            : !entry.get<bool>();
        if (fail) {
          throw TransportError("scripted transport failure at attempt " +
                               std::to_string(attempt + 1));
        }
      }
    }
    if (!builtin_.empty()) return serve_builtin(request);
    return serve_script(request);
  }

 private:
  json serve_script(const json& request) {
    if (table_.contains("key_field")) {
      const std::string field = table_["key_field"].get<std::string>();
      const auto it = request.find(field);
      if (it == request.end()) {
        throw TransportError("request lacks routing field " + field);
      }
      const std::string key =
          it->is_string() ? it->get<std::string>() : it->dump();
      const auto& by_key = table_["by_key"];
      if (by_key.contains(key)) return by_key[key];
      if (by_key.contains("*")) return by_key["*"];
      throw TransportError("no scripted response for key " + key);
    }
    if (table_.contains("responses")) {
      const auto& responses = table_["responses"];
      if (responses.empty()) {
        throw TransportError("mock script has an empty responses list");
      }
      const std::size_t idx = std::min(serve_index_++, responses.size() - 1);
      return responses[idx];
    }
    if (table_.contains("default")) return table_["default"];
    throw TransportError("mock script defines no response source");
  }

  json serve_builtin(const json& request) {
    if (builtin_ == "annotator-canonical") {
      return json{{"text", canned_trace_text(request)}};
    }
    if (builtin_ == "thinker-fixed") {
      return json{{"trace", canned_trace_text(request)}};
    }
    if (builtin_ == "generator-echo") {
      return json{{"image",
                   "img://" + request.value("enhanced_prompt", std::string())}};
    }
    if (builtin_ == "judge-constant") {
      json scores = json::object();
      if (params_.empty()) {
        scores = {{"consistency", 2}, {"realism", 1}, {"aesthetic", 2}};
      } else {
        for (const auto& [k, v] : params_) {
          try {
            scores[k] = std::stoi(v);
          } catch (const std::exception&) {
            throw ConfigError("judge-constant parameter " + k +
                              " is not an integer");
          }
        }
      }
      return scores;
    }
    if (builtin_ == "judge-bandit") {
      const auto it = params_.find("win");
      if (it == params_.end()) {
        throw ConfigError("judge-bandit needs a win=<index> parameter");
      }
      const std::string needle = "template-" + it->second;
      const std::string haystack = request.value("image", std::string()) + " " +
                                   request.value("enhanced_prompt", std::string());
      const int s = haystack.find(needle) != std::string::npos ? 2 : 0;
      return json{{"consistency", s}, {"realism", s}, {"aesthetic", s}};
    }
    throw ConfigError("unknown builtin mock " + builtin_);
  }

  std::string script_;
  std::string builtin_;
  std::map<std::string, std::string> params_;
  json table_;
  std::size_t attempt_index_ = 0;
  std::size_t serve_index_ = 0;
};

class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(BackendSpec spec) : spec_(std::move(spec)) {
    if (spec_.endpoint.empty()) {
      throw ConfigError("http backend needs an endpoint");
    }
  }

  json roundtrip(const json& request, const std::string& idem_key) override {
    httplib::Client client(spec_.endpoint);
    const auto ms = spec_.timeout.count();
    client.set_connection_timeout(ms / 1000, (ms % 1000) * 1000);
    client.set_read_timeout(ms / 1000, (ms % 1000) * 1000);
    client.set_write_timeout(ms / 1000, (ms % 1000) * 1000);

    httplib::Headers headers{{"Idempotency-Key", idem_key}};
    if (!spec_.bearer_token.empty()) {
      headers.emplace("Authorization", "Bearer " + spec_.bearer_token);
    }
    const auto res = client.Post("/" + role_name(spec_.role), headers,
                                 request.dump(), "application/json");
    if (!res) {
      throw TransportError("transport failure: " +
                           httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw TransportError("HTTP status " + std::to_string(res->status));
    }
    try {
      return json::parse(res->body);
    } catch (const json::parse_error&) {
      throw TransportError("response body is not valid JSON");
    }
  }

 private:
  BackendSpec spec_;
};

/// Serves a captured transcript sequentially. Used with max_retries = 0
/// so one pipeline call consumes exactly one recorded exchange.
class ReplayTransport final : public Transport {
 public:
  ReplayTransport(Role role, const std::string& path) {
    std::ifstream in(path);
    if (!in) {
      throw IoError("cannot open transcript " + path);
    }
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        throw ParseError("transcript " + path + ": " + e.what());
      }
      if (first && j.contains("meta")) {
        first = false;
        continue;
      }
      first = false;
      auto rec = exchange_from_json(j);
      if (rec.role == role) records_.push_back(std::move(rec));
    }
  }

  json roundtrip(const json& request, const std::string&) override {
    if (cursor_ >= records_.size()) {
      throw TransportError("replay transcript exhausted after " +
                           std::to_string(cursor_) + " exchanges");
    }
    const ExchangeRecord& rec = records_[cursor_];
    if (rec.request != request) {
      throw TransportError("replay divergence at exchange " +
                           std::to_string(cursor_));
    }
    ++cursor_;
    if (!rec.ok) {
      throw TransportError("replayed failure: " + rec.error);
    }
    return rec.response;
  }

 private:
  std::vector<ExchangeRecord> records_;
  std::size_t cursor_ = 0;
};

}  // namespace

std::string role_name(Role role) {
  switch (role) {
    case Role::Thinker: return "thinker";
    case Role::Generator: return "generator";
    case Role::Judge: return "judge";
    case Role::Annotator: return "annotator";
  }
  throw DomainError("unknown role");
}

Role role_from_name(const std::string& name) {
  if (name == "thinker") return Role::Thinker;
  if (name == "generator") return Role::Generator;
  if (name == "judge") return Role::Judge;
  if (name == "annotator") return Role::Annotator;
  throw DomainError("unknown backend role " + name);
}

std::string kind_name(Kind kind) {
  return kind == Kind::Mock ? "mock" : "http";
}

Kind kind_from_name(const std::string& name) {
  if (name == "mock") return Kind::Mock;
  if (name == "http") return Kind::Http;
  throw DomainError("unknown backend kind " + name);
}

json to_json(const BackendSpec& spec) {
  return json{{"role", role_name(spec.role)},
              {"kind", kind_name(spec.kind)},
              {"endpoint", spec.endpoint},
              {"timeout_ms", spec.timeout.count()},
              {"max_retries", spec.max_retries},
              {"mock_script", spec.mock_script},
              {"bearer_token", spec.bearer_token},
              {"backoff_ms", spec.backoff_base.count()}};
}

BackendSpec spec_from_json(const json& j) {
  BackendSpec spec;
  spec.role = role_from_name(j.at("role").get<std::string>());
  if (j.contains("kind")) spec.kind = kind_from_name(j["kind"].get<std::string>());
  spec.endpoint = j.value("endpoint", std::string());
  spec.timeout = std::chrono::milliseconds(j.value("timeout_ms", 60000));
  spec.max_retries = j.value("max_retries", std::size_t{3});
  spec.mock_script = j.value("mock_script", std::string());
  spec.bearer_token = j.value("bearer_token", std::string());
  spec.backoff_base = std::chrono::milliseconds(j.value("backoff_ms", 100));
  return spec;
}

BackendSpec spec_from_string(Role role, const std::string& text) {
  BackendSpec spec;
  spec.role = role;
  if (text.rfind("http://", 0) == 0 || text.rfind("https://", 0) == 0) {
    spec.kind = Kind::Http;
    spec.endpoint = text;
  } else if (text.rfind("mock:", 0) == 0) {
    spec.kind = Kind::Mock;
    spec.mock_script = text.substr(5);
  } else {
    spec.kind = Kind::Mock;  // builtin:<name> or a script path
    spec.mock_script = text;
  }
  return spec;
}

json to_json(const ExchangeRecord& rec) {
  return json{{"role", role_name(rec.role)},
              {"request", rec.request},
              {"response", rec.response},
              {"error", rec.error},
              {"latency_ms", rec.latency.count()},
              {"attempts", rec.attempts},
              {"ok", rec.ok}};
}

ExchangeRecord exchange_from_json(const json& j) {
  ExchangeRecord rec;
  rec.role = role_from_name(j.at("role").get<std::string>());
  rec.request = j.value("request", json());
  rec.response = j.value("response", json());
  rec.error = j.value("error", std::string());
  rec.latency = std::chrono::milliseconds(j.value("latency_ms", 0));
  rec.attempts = j.value("attempts", std::size_t{0});
  rec.ok = j.value("ok", false);
  return rec;
}

void validate_request(Role role, const json& request) {
  switch (role) {
    case Role::Thinker: {
      require_string_field(request, "system_prompt", "thinker request");
      require_string_field(request, "instruction", "thinker request");
      if (request.contains("images") && !request["images"].is_array()) {
        throw SchemaError("thinker request field images must be an array");
      }
      return;
    }
    case Role::Generator: {
      require_string_field(request, "enhanced_prompt", "generator request");
      if (request.contains("steps") &&
          (!request["steps"].is_number_integer() ||
           request["steps"].get<int>() < 1)) {
        throw SchemaError("generator request field steps must be a positive integer");
      }
      return;
    }
    case Role::Judge: {
      const std::string rubric =
          require_string_field(request, "rubric", "judge request");
      if (rubric != "edit" && rubric != "t2i") {
        throw SchemaError("judge request field rubric must be edit or t2i");
      }
      require_string_field(request, "image", "judge request");
      return;
    }
    case Role::Annotator: {
      require_string_field(request, "system_prompt", "annotator request");
      require_string_field(request, "instruction", "annotator request");
      const std::string kind =
          require_string_field(request, "task_kind", "annotator request");
      trace::task_kind_from_string(kind);  // DomainError on bad value
      return;
    }
  }
}

void validate_response(Role role, const json& response) {
  switch (role) {
    case Role::Thinker:
      require_string_field(response, "trace", "thinker response");
      return;
    case Role::Generator:
      if (require_string_field(response, "image", "generator response").empty()) {
        throw SchemaError("generator response field image must be non-empty");
      }
      return;
    case Role::Judge:
      if (!response.is_object()) {
        throw SchemaError("judge response must be a JSON object");
      }
      return;
    case Role::Annotator:
      require_string_field(response, "text", "annotator response");
      return;
  }
}

json thinker_request(const std::string& system_prompt,
                     const std::string& instruction,
                     const std::vector<std::string>& images) {
  json j{{"system_prompt", system_prompt}, {"instruction", instruction}};
  if (!images.empty()) j["images"] = images;
  return j;
}

json generator_request(const std::string& enhanced_prompt,
                       const std::optional<std::string>& reference, int steps) {
  json j{{"enhanced_prompt", enhanced_prompt}, {"steps", steps}};
  if (reference) j["reference"] = *reference;
  return j;
}

json judge_request(const std::string& rubric, const std::string& image,
                   const std::string& instruction,
                   const std::string& enhanced_prompt) {
  json j{{"rubric", rubric}, {"image", image}};
  if (!instruction.empty()) j["instruction"] = instruction;
  if (!enhanced_prompt.empty()) j["enhanced_prompt"] = enhanced_prompt;
  return j;
}

json annotator_request(const std::string& system_prompt,
                       const std::string& instruction,
                       const std::string& task_kind,
                       const std::optional<std::string>& reference,
                       const std::string& example_id) {
  json j{{"system_prompt", system_prompt},
         {"instruction", instruction},
         {"task_kind", task_kind}};
  if (reference) j["reference"] = *reference;
  if (!example_id.empty()) j["example_id"] = example_id;
  return j;
}

std::unique_ptr<Transport> make_mock_transport(const std::string& script) {
  return std::make_unique<MockTransport>(script);
}

std::unique_ptr<Transport> make_http_transport(const BackendSpec& spec) {
  return std::make_unique<HttpTransport>(spec);
}

TranscriptRecorder::TranscriptRecorder(std::string path, json meta)
    : path_(std::move(path)) {
  util::write_file(path_, json{{"meta", std::move(meta)}}.dump() + "\n");
}

void TranscriptRecorder::append(const ExchangeRecord& rec) {
  std::lock_guard<std::mutex> lock(mu_);
  std::ofstream out(path_, std::ios::app);
  if (!out) {
    throw IoError("cannot append to transcript " + path_);
  }
  out << to_json(rec).dump() << "\n";
}

Backend::Backend(BackendSpec spec) : spec_(std::move(spec)) {
  if (spec_.kind == Kind::Mock) {
    if (spec_.mock_script.empty()) {
      throw ConfigError("mock backend needs mock_script or a builtin name");
    }
    transport_ = make_mock_transport(spec_.mock_script);
  } else {
    transport_ = make_http_transport(spec_);
  }
}

Backend::Backend(BackendSpec spec, std::unique_ptr<Transport> transport)
    : spec_(std::move(spec)), transport_(std::move(transport)) {}

void Backend::attach_recorder(std::shared_ptr<TranscriptRecorder> recorder) {
  std::lock_guard<std::mutex> lock(mu_);
  recorder_ = std::move(recorder);
}

std::vector<ExchangeRecord> Backend::exchanges() const {
  std::lock_guard<std::mutex> lock(mu_);
  return exchanges_;
}

std::pair<json, ExchangeRecord> Backend::call(const json& request) {
  std::lock_guard<std::mutex> lock(mu_);
  const auto start = std::chrono::steady_clock::now();

  ExchangeRecord rec;
  rec.role = spec_.role;
  rec.request = request;

  auto finish = [&](bool ok) {
    rec.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);
    rec.ok = ok;
    exchanges_.push_back(rec);
    if (recorder_) recorder_->append(rec);
  };

  try {
    validate_request(spec_.role, request);
  } catch (const SchemaError& e) {
    rec.error = e.what();
    rec.attempts = 0;
    finish(false);
    throw;
  }

  json outbound = request;
  if (spec_.role == Role::Generator && !outbound.contains("steps")) {
    outbound["steps"] = 10;
  }
  rec.request = outbound;

  const std::string idem =
      role_name(spec_.role) + "-" + std::to_string(call_index_++);
  const std::size_t max_attempts = spec_.max_retries + 1;

  for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
    rec.attempts = attempt;
    try {
      json response = transport_->roundtrip(outbound, idem);
      try {
        validate_response(spec_.role, response);
      } catch (const SchemaError& e) {
        rec.error = e.what();
        finish(false);
        throw;
      }
      rec.response = std::move(response);
      rec.error.clear();
      finish(true);
      return {rec.response, exchanges_.back()};
    } catch (const TransportError& e) {
      rec.error = e.what();
      if (attempt == max_attempts) {
        finish(false);
        throw;
      }
      if (spec_.backoff_base.count() > 0) {
        std::this_thread::sleep_for(spec_.backoff_base * (1u << (attempt - 1)));
      }
    }
  }
  throw StateError("unreachable retry loop exit");
}

std::unique_ptr<Transport> make_replay_transport(
    BackendSpec& spec, const std::string& transcript_path) {
  auto transport = std::make_unique<ReplayTransport>(spec.role, transcript_path);
  spec.max_retries = 0;  // one recorded exchange per call
  spec.backoff_base = std::chrono::milliseconds(0);
  return transport;
}

Backend make_replay_backend(BackendSpec spec, const std::string& transcript_path) {
  auto transport = make_replay_transport(spec, transcript_path);
  return Backend(std::move(spec), std::move(transport));
}

}  // namespace planexec::backend
