#include <doctest.h>

#include <nlohmann/json.hpp>

#include <sstream>
#include <thread>

#include "pgpt/cli.hpp"
#include "pgpt/config.hpp"
#include "support.hpp"

namespace cfg = pgpt::config;
namespace cli = pgpt::cli;

namespace {

cfg::EnvLookup env_of(std::map<std::string, std::string> vars) {
  return [vars = std::move(vars)](std::string_view name) -> std::optional<std::string> {
    const auto it = vars.find(std::string(name));
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

std::pair<cfg::ConfigErrc, std::string> config_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const cfg::ConfigError& e) {
    return {e.code(), e.key()};
  }
  FAIL("expected ConfigError");
  return {cfg::ConfigErrc::InvalidValue, ""};
}

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

CliRun run(const std::vector<std::string>& args, cli::CliContext ctx = {}) {
  if (!ctx.env) ctx.env = env_of({});
  std::ostringstream out, err;
  CliRun r;
  r.code = cli::run_cli(args, out, err, ctx);
  r.out = out.str();
  r.err = err.str();
  return r;
}

cli::CliContext no_env() {
  cli::CliContext ctx;
  ctx.env = env_of({});
  return ctx;
}

}  // namespace

TEST_CASE("flatten accepts nested, dotted and mixed objects") {
  const auto flat = cfg::flatten(R"({"gate": {"threshold_dbfs": -40, "hangover_ms": 500},
                                      "asr.model": "tiny", "gate.hallucination_phrases": ["a", "b"]})");
  CHECK(flat.size() == 4);
  CHECK(flat.at("gate.threshold_dbfs") == -40);
  CHECK(flat.at("asr.model") == "tiny");
  CHECK(flat.at("gate.hallucination_phrases").size() == 2);

  CHECK(config_error([] { cfg::flatten("[1,2]"); }).first == cfg::ConfigErrc::ParseFailure);
  CHECK(config_error([] { cfg::flatten("{not json"); }).first == cfg::ConfigErrc::ParseFailure);
  CHECK(config_error([] { cfg::flatten(R"({"gate": {"hangover_ms": 1}, "gate.hangover_ms": 2})"); }).first ==
        cfg::ConfigErrc::ParseFailure);
}

TEST_CASE("merge applies known keys and rejects typos and wrong types") {
  cfg::Settings s;
  cfg::merge(s, cfg::flatten(R"({"gate": {"threshold_dbfs": -42.5, "min_speech_ms": 200},
                                 "robot.virtual_clock": true, "llm.history_exchanges": 5,
                                 "gate.hallucination_phrases": ["ok"]})"));
  CHECK(s.gate.threshold_dbfs == -42.5);
  CHECK(s.gate.min_speech_ms == 200);
  CHECK(s.robot.virtual_clock);
  CHECK(s.llm.history_exchanges == 5);
  CHECK(s.hallucination_phrases == std::vector<std::string>{"ok"});

  const auto typo = config_error([&] { cfg::merge(s, cfg::flatten(R"({"gate": {"thresold_dbfs": -30}})")); });
  CHECK(typo.first == cfg::ConfigErrc::UnknownKey);
  CHECK(typo.second == "gate.thresold_dbfs");

  CHECK(config_error([&] { cfg::merge(s, cfg::flatten(R"({"gate.min_speech_ms": "300"})")); }).first ==
        cfg::ConfigErrc::TypeMismatch);
  CHECK(config_error([&] { cfg::merge(s, cfg::flatten(R"({"gate.min_speech_ms": 1.5})")); }).first ==
        cfg::ConfigErrc::TypeMismatch);
  CHECK(config_error([&] { cfg::merge(s, cfg::flatten(R"({"robot.virtual_clock": 1})")); }).first ==
        cfg::ConfigErrc::TypeMismatch);
  CHECK(config_error([&] { cfg::merge(s, cfg::flatten(R"({"gate.hallucination_phrases": [1]})")); }).first ==
        cfg::ConfigErrc::TypeMismatch);
}

TEST_CASE("every known key round-trips through merge") {
  for (const auto& key : cfg::known_keys()) {
    CAPTURE(key);
    cfg::Settings s;
    // Probe the key's type: exactly one of these values is accepted.
    int accepted = 0;
    for (const auto& v : {nlohmann::json("x"), nlohmann::json(7), nlohmann::json(true),
                          nlohmann::json::array({"p"})}) {
      try {
        cfg::merge(s, {{key, v}});
        ++accepted;
      } catch (const cfg::ConfigError& e) {
        CHECK(e.code() == cfg::ConfigErrc::TypeMismatch);
      }
    }
    CHECK(accepted == 1);
  }
}

TEST_CASE("load precedence is overrides over env over file over defaults") {
  testing::TempDir dir;
  testing::write_file(dir / "c.json", R"({"asr": {"api_key": "from-file", "model": "file-model"},
                                          "gate.hangover_ms": 400})");

  const auto defaults = cfg::load(std::nullopt, env_of({}));
  CHECK(defaults.gate.hangover_ms == 700);
  CHECK(defaults.asr.model == "whisper-small");

  const auto file_only = cfg::load(dir / "c.json", env_of({}));
  CHECK(file_only.asr.api_key == "from-file");
  CHECK(file_only.gate.hangover_ms == 400);

  const auto with_env = cfg::load(dir / "c.json", env_of({{"PGPT_ASR_API_KEY", "from-env"}}));
  CHECK(with_env.asr.api_key == "from-env");
  CHECK(with_env.asr.model == "file-model");

  const auto with_flag =
      cfg::load(dir / "c.json", env_of({{"PGPT_ASR_API_KEY", "from-env"}}), {{"asr.api_key", "from-flag"}});
  CHECK(with_flag.asr.api_key == "from-flag");

  const auto via_env_path = cfg::load(std::nullopt, env_of({{"PGPT_CONFIG", (dir / "c.json").string()},
                                                            {"PGPT_LLM_API_KEY", "llm-key"}}));
  CHECK(via_env_path.gate.hangover_ms == 400);
  CHECK(via_env_path.llm.api_key == "llm-key");
}

TEST_CASE("load reports missing files, typos with the file name, and invalid values") {
  testing::TempDir dir;
  CHECK(config_error([&] { cfg::load(dir / "absent.json", env_of({})); }).first == cfg::ConfigErrc::IoFailure);

  testing::write_file(dir / "typo.json", R"({"gate": {"thresold_dbfs": -30}})");
  try {
    cfg::load(dir / "typo.json", env_of({}));
    FAIL("expected ConfigError");
  } catch (const cfg::ConfigError& e) {
    CHECK(e.code() == cfg::ConfigErrc::UnknownKey);
    CHECK(std::string(e.what()).find("typo.json") != std::string::npos);
    CHECK(std::string(e.what()).find("gate.thresold_dbfs") != std::string::npos);
  }

  auto invalid = [&](const std::string& key, nlohmann::json value) {
    return config_error([&] { cfg::load(std::nullopt, env_of({}), {{key, value}}); });
  };
  CHECK(invalid("asr.backend", "grpc").first == cfg::ConfigErrc::InvalidValue);
  CHECK(invalid("llm.backend", "").first == cfg::ConfigErrc::InvalidValue);
  CHECK(invalid("pipeline.empty_retry_limit", 0).second == "pipeline.empty_retry_limit");
  CHECK(invalid("hub.observer_outbox_limit", -1).first == cfg::ConfigErrc::InvalidValue);
  CHECK(invalid("gate.min_speech_ms", 0).first == cfg::ConfigErrc::InvalidValue);
  CHECK(invalid("gate.threshold_dbfs", 3).first == cfg::ConfigErrc::InvalidValue);
}

TEST_CASE("demo config file loads") {
  const auto s = cfg::load(testing::repo_path("data/demo/config.json"), env_of({}));
  CHECK(s.asr.backend == "mock");
  CHECK(std::filesystem::exists(s.llm.scenario));
  CHECK(std::filesystem::exists(s.actions_registry));
  CHECK(std::filesystem::exists(s.robot.gestures));
}

TEST_CASE("eval wer subcommand") {
  testing::TempDir dir;
  testing::write_file(dir / "ref.txt", "please wave\nhello there\n");
  testing::write_file(dir / "same.txt", "Please wave!\nhello, there\n");
  testing::write_file(dir / "hyp.txt", "please\nhello there friend\n");
  testing::write_file(dir / "short.txt", "please wave\n");

  auto r = run({"eval", "wer", "--ref", (dir / "ref.txt").string(), "--hyp", (dir / "same.txt").string()});
  CHECK(r.code == cli::kExitOk);
  CHECK(r.out.starts_with("wer 0.0000 "));

  r = run({"eval", "wer", "--ref", (dir / "ref.txt").string(), "--hyp", (dir / "hyp.txt").string()});
  CHECK(r.code == cli::kExitOk);
  CHECK(r.out == "wer 0.5000 S=0 D=1 I=1 N1=4 utterances=2\n");

  r = run({"eval", "wer", "--ref", (dir / "ref.txt").string(), "--hyp", (dir / "short.txt").string()});
  CHECK(r.code == cli::kExitRuntime);
  CHECK(r.err.find("lines") != std::string::npos);

  r = run({"eval", "wer", "--ref", (dir / "ref.txt").string(), "--hyp", (dir / "nope.txt").string()});
  CHECK(r.code == cli::kExitRuntime);
}

TEST_CASE("eval bench subcommand matches the golden report") {
  testing::TempDir dir;
  const auto out_path = (dir / "report.csv").string();
  auto r = run({"eval", "bench", "--manifest", testing::test_data("bench_manifest.json").string(), "--out", out_path},
               no_env());
  REQUIRE(r.code == cli::kExitOk);
  CHECK(r.out.find("wrote 2 rows") != std::string::npos);
  std::string why;
  CHECK_MESSAGE(testing::bench_csv_matches(testing::read_file(out_path),
                                           testing::read_file(testing::test_data("bench_golden.csv")), 50.0, &why),
                why);

  const auto json_path = (dir / "report.json").string();
  r = run({"eval", "bench", "--manifest", testing::test_data("bench_manifest.json").string(), "--out", json_path,
           "--format", "structured-text"},
          no_env());
  REQUIRE(r.code == cli::kExitOk);
  CHECK(nlohmann::json::parse(testing::read_file(json_path))["rows"].size() == 2);

  r = run({"eval", "bench", "--manifest", "m.json", "--out", "x", "--format", "xml"});
  CHECK(r.code == cli::kExitUsage);
}

TEST_CASE("usage errors exit 2 with a message and help") {
  auto r = run({"frobnicate"});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("unknown subcommand 'frobnicate'") != std::string::npos);
  CHECK(r.err.find("Usage") != std::string::npos);

  r = run({});
  CHECK(r.code == cli::kExitUsage);

  r = run({"eval", "wer", "--ref", "a"});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("--hyp") != std::string::npos);

  r = run({"pipeline", "run"});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("--input") != std::string::npos);
}

TEST_CASE("config typos are runtime errors naming the key") {
  testing::TempDir dir;
  testing::write_file(dir / "bad.json", R"({"gate": {"thresold_dbfs": -30}})");
  const auto r = run({"eval", "bench", "--manifest", testing::test_data("bench_manifest.json").string(), "--out",
                      (dir / "o.csv").string(), "--config", (dir / "bad.json").string()});
  CHECK(r.code == cli::kExitRuntime);
  CHECK(r.err.find("gate.thresold_dbfs") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir / "o.csv"));

  cli::CliContext ctx;
  ctx.env = env_of({{"PGPT_CONFIG", (dir / "bad.json").string()}});
  const auto via_env = run({"eval", "bench", "--manifest", testing::test_data("bench_manifest.json").string(),
                            "--out", (dir / "o.csv").string()},
                           ctx);
  CHECK(via_env.code == cli::kExitRuntime);
}

TEST_CASE("help is available at every level and is stable") {
  const std::vector<std::vector<std::string>> paths = {
      {},         {"hub"},  {"hub", "serve"},   {"robot"}, {"robot", "run"}, {"pipeline"},
      {"pipeline", "run"}, {"eval"}, {"eval", "wer"}, {"eval", "bench"},
  };
  for (const auto& p : paths) {
    auto args = p;
    args.push_back("--help");
    CAPTURE(args.size());
    const auto a = run(args);
    const auto b = run(args);
    CHECK(a.code == cli::kExitOk);
    CHECK(a.err.empty());
    CHECK(a.out.find("Usage") != std::string::npos);
    CHECK(a.out == b.out);
  }
  CHECK(run({"--help"}).out.find("pipeline") != std::string::npos);
  CHECK(run({"eval", "bench", "--help"}).out.find("structured-text") != std::string::npos);
  CHECK(run({"pipeline", "run", "--help"}).out.find("--serve-injections") != std::string::npos);
  CHECK(run({"--version"}).out == std::string(PGPT_VERSION) + "\n");
}

TEST_CASE("hub serve runs until stopped") {
  std::atomic<bool> stop{false};
  cli::CliContext ctx = no_env();
  ctx.stop = &stop;
  std::ostringstream out, err;
  int code = -1;
  std::thread t([&] {
    code = cli::run_cli({"hub", "serve", "--bind", "127.0.0.1:0", "--ws-bind", "127.0.0.1:0"}, out, err, ctx);
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(200));
  stop = true;
  t.join();
  CHECK(code == cli::kExitOk);
  CHECK(out.str().find("hub listening tcp=127.0.0.1:") != std::string::npos);
  CHECK(out.str().find("hub stopped") != std::string::npos);
}

TEST_CASE("hub serve reports bad bind addresses") {
  const auto r = run({"hub", "serve", "--bind", "not-an-endpoint"});
  CHECK(r.code == cli::kExitRuntime);
}

TEST_CASE("relative paths in a config file resolve against the file's directory") {
  testing::TempDir dir;
  std::filesystem::create_directories(dir / "conf");
  testing::write_file(dir / "conf/c.json", R"({"llm.scenario": "s.json", "actions.registry": "../a.json",
                                               "robot.event_log": "/abs/events.log", "asr.model": "m/x"})");
  const auto s = cfg::load(dir / "conf/c.json", env_of({}));
  CHECK(s.llm.scenario == (dir / "conf/s.json").string());
  CHECK(s.actions_registry == (dir / "a.json").string());
  CHECK(s.robot.event_log == "/abs/events.log");
  CHECK(s.asr.model == "m/x");
}
