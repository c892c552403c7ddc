#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "planexec/errors.hpp"

namespace planexec::backend {

enum class Role { Thinker, Generator, Judge, Annotator };
enum class Kind { Mock, Http };

std::string role_name(Role role);
Role role_from_name(const std::string& name);
std::string kind_name(Kind kind);
Kind kind_from_name(const std::string& name);

struct BackendSpec {
  Role role = Role::Judge;
  Kind kind = Kind::Mock;
  std::string endpoint;                       // required for Http
  std::chrono::milliseconds timeout{60000};
  std::size_t max_retries = 3;                // attempts <= max_retries + 1
  std::string mock_script;                    // path or "builtin:<name>" for Mock
  std::string bearer_token;                   // optional Authorization header
  std::chrono::milliseconds backoff_base{100};  // doubled per retry; 0 = no sleep
};

nlohmann::json to_json(const BackendSpec& spec);
BackendSpec spec_from_json(const nlohmann::json& j);

/// Shorthand forms accepted on the command line and in config files:
/// "builtin:<name>", "mock:<script path>", "http:<url>".
BackendSpec spec_from_string(Role role, const std::string& text);

struct ExchangeRecord {
  Role role = Role::Judge;
  nlohmann::json request;
  nlohmann::json response;  // null when the call failed
  std::string error;        // message when the call failed
  std::chrono::milliseconds latency{0};
  std::size_t attempts = 0;
  bool ok = false;
};

nlohmann::json to_json(const ExchangeRecord& rec);
ExchangeRecord exchange_from_json(const nlohmann::json& j);

/// Role request/response schemas. Violations throw SchemaError naming
/// the offending field; requests are validated before any transport
/// attempt.
void validate_request(Role role, const nlohmann::json& request);
void validate_response(Role role, const nlohmann::json& response);

/// Request builders applying the protocol defaults.
nlohmann::json thinker_request(const std::string& system_prompt,
                               const std::string& instruction,
                               const std::vector<std::string>& images = {});
nlohmann::json generator_request(const std::string& enhanced_prompt,
                                 const std::optional<std::string>& reference = {},
                                 int steps = 10);
nlohmann::json judge_request(const std::string& rubric, const std::string& image,
                             const std::string& instruction = "",
                             const std::string& enhanced_prompt = "");
nlohmann::json annotator_request(const std::string& system_prompt,
                                 const std::string& instruction,
                                 const std::string& task_kind,
                                 const std::optional<std::string>& reference = {},
                                 const std::string& example_id = "");

/// Delivery layer under the Backend facade. Implementations throw
/// TransportError on delivery failure and never retry themselves.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual nlohmann::json roundtrip(const nlohmann::json& request,
                                   const std::string& idempotency_key) = 0;
};

/// Deterministic scripted transport: a pure function of
/// (script, request, call index). `script` is either "builtin:<name>"
/// or the path of a JSON script file with any of:
///   fail_pattern: ["fail","ok",...]   consumed one entry per attempt
///   key_field:    request field routing into by_key (falls back to "*")
///   by_key:       { value: response, ... }
///   responses:    [response, ...]     served by call order, last repeats
///   default:      response
/// Builtins: annotator-canonical, thinker-fixed, generator-echo,
/// judge-constant?field=int&..., judge-bandit?win=<k>.
std::unique_ptr<Transport> make_mock_transport(const std::string& script);

/// JSON-over-HTTP transport: POST <endpoint>/<role> with the request
/// body, bearer auth and an Idempotency-Key header.
std::unique_ptr<Transport> make_http_transport(const BackendSpec& spec);

/// Appends ExchangeRecords to a JSONL transcript, one header line of
/// metadata first. Thread-safe.
class TranscriptRecorder {
 public:
  TranscriptRecorder(std::string path, nlohmann::json meta);
  void append(const ExchangeRecord& rec);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::mutex mu_;
};

/// Client facade: schema validation first, then delivery with
/// exponential-backoff retries. Every call produces exactly one
/// ExchangeRecord (kept in an in-memory log and mirrored to an attached
/// recorder), success or failure. Shareable across threads; calls are
/// serialized internally so scripted call indices stay well-defined.
class Backend {
 public:
  explicit Backend(BackendSpec spec);
  Backend(BackendSpec spec, std::unique_ptr<Transport> transport);

  std::pair<nlohmann::json, ExchangeRecord> call(const nlohmann::json& request);

  const BackendSpec& spec() const { return spec_; }
  void attach_recorder(std::shared_ptr<TranscriptRecorder> recorder);
  std::vector<ExchangeRecord> exchanges() const;

 private:
  BackendSpec spec_;
  std::unique_ptr<Transport> transport_;
  std::shared_ptr<TranscriptRecorder> recorder_;
  std::vector<ExchangeRecord> exchanges_;
  std::size_t call_index_ = 0;
  mutable std::mutex mu_;
};

/// Transport serving a previously captured transcript in order,
/// checking each request against the recorded one and failing with
/// TransportError on divergence. Recorded failures replay as failures.
/// Adjusts spec in place (max_retries 0, no backoff) so one call
/// consumes exactly one recorded exchange.
std::unique_ptr<Transport> make_replay_transport(
    BackendSpec& spec, const std::string& transcript_path);

/// Convenience wrapper building the whole replay backend.
Backend make_replay_backend(BackendSpec spec, const std::string& transcript_path);

}  // namespace planexec::backend
