// HTTP clients for the hosted transcription and chat-completion backends.

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "pgpt/asr.hpp"
#include "pgpt/dialogue.hpp"
#include "pgpt/wav.hpp"

namespace pgpt {

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

// Splits "http://host:port/some/path" into origin and path.
std::optional<Url> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) return std::nullopt;
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") return std::nullopt;
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return Url{url, "/"};
  return Url{url.substr(0, path_start), url.substr(path_start)};
}

httplib::Client make_client(const Url& url, std::chrono::milliseconds timeout) {
  httplib::Client client(url.origin);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  return client;
}

}  // namespace

namespace asr {

HttpTranscriber::HttpTranscriber(HttpTranscriberConfig config) : config_(std::move(config)) {}

std::string HttpTranscriber::recognize(const AudioInput& input) {
  const auto url = split_url(config_.endpoint);
  if (!url) throw AsrError(AsrErrc::BackendUnreachable, "invalid asr.endpoint '" + config_.endpoint + "'");

  std::vector<std::uint8_t> wav_bytes;
  if (!input.samples.empty()) {
    wav_bytes = wav::encode_pcm16(input.samples);
  } else {
    wav_bytes = wav::encode_pcm16(wav::read_pcm16_mono(input.audio_path));
  }

  auto client = make_client(*url, config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  httplib::MultipartFormDataItems items = {
      {"file", std::string(wav_bytes.begin(), wav_bytes.end()), "audio.wav", "audio/wav"},
      {"model", config_.model, "", ""},
      {"response_format", "json", "", ""},
  };
  auto res = client.Post(url->path, headers, items);
  if (!res) {
    throw AsrError(AsrErrc::BackendUnreachable,
                   "transcription endpoint unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw AsrError(AsrErrc::BackendRejected, "transcription endpoint returned " + std::to_string(res->status),
                   res->status);
  }
  const auto body = nlohmann::json::parse(res->body, nullptr, false);
  if (body.is_discarded() || !body.is_object() || !body.contains("text") || !body["text"].is_string()) {
    throw AsrError(AsrErrc::BackendRejected, "transcription response has no text field", res->status);
  }
  return body["text"].get<std::string>();
}

}  // namespace asr

namespace dialogue {

HttpResponder::HttpResponder(HttpResponderConfig config) : config_(std::move(config)) {}

std::string HttpResponder::complete(std::span<const ChatMessage> messages) {
  const auto url = split_url(config_.endpoint);
  if (!url) throw DialogueError(DialogueErrc::ResponderUnreachable, "invalid llm.endpoint '" + config_.endpoint + "'");

  nlohmann::json request;
  request["model"] = config_.model;
  request["messages"] = nlohmann::json::array();
  for (const auto& m : messages) {
    request["messages"].push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  }

  auto client = make_client(*url, config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  auto res = client.Post(url->path, headers, request.dump(), "application/json");
  if (!res) {
    throw DialogueError(DialogueErrc::ResponderUnreachable,
                        "chat endpoint unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw DialogueError(DialogueErrc::ResponderRejected, "chat endpoint returned " + std::to_string(res->status),
                        res->status);
  }
  const auto body = nlohmann::json::parse(res->body, nullptr, false);
  if (body.is_object()) {
    const auto content = body.value(nlohmann::json::json_pointer("/choices/0/message/content"), nlohmann::json());
    if (content.is_string()) return content.get<std::string>();
    if (body.contains("text") && body["text"].is_string()) return body["text"].get<std::string>();
  }
  throw DialogueError(DialogueErrc::ResponderRejected, "chat response has no message content", res->status);
}

}  // namespace dialogue

}  // namespace pgpt
