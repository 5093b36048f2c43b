#include "pgpt/cli.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <thread>

#include <CLI11.hpp>

#include "pgpt/evalkit.hpp"
#include "pgpt/hub.hpp"
#include "pgpt/pipeline.hpp"
#include "pgpt/robot_runner.hpp"

namespace pgpt::cli {

namespace {

using std::chrono::milliseconds;

struct Options {
  std::string config;

  std::string bind = "127.0.0.1:7000";
  std::string ws_bind = "127.0.0.1:7001";
  std::string hub_log;

  std::string hub = "127.0.0.1:7000";
  std::string registry;
  std::string gestures;
  std::string event_log;
  bool virtual_clock = false;

  std::string input;
  std::string summary;
  bool no_wait = false;
  bool serve_injections = false;

  std::string ref;
  std::string hyp;
  std::string manifest;
  std::string backend = "mock";
  std::string out;
  std::string format = "csv";
};

config::Settings load_settings(const Options& o, const CliContext& ctx) {
  std::optional<std::filesystem::path> file;
  if (!o.config.empty()) file = o.config;
  return config::load(file, ctx.env);
}

void wait_for_stop(const std::atomic<bool>& stop) {
  while (!stop) std::this_thread::sleep_for(milliseconds(50));
}

int cmd_hub_serve(const Options& o, const CliContext& ctx, const std::atomic<bool>& stop, std::ostream& out) {
  const auto s = load_settings(o, ctx);
  hub::HubConfig hc;
  hc.heartbeat_interval = milliseconds(s.hub.heartbeat_interval_ms);
  hc.missed_heartbeats = static_cast<int>(s.hub.missed_heartbeats);
  hc.write_timeout = milliseconds(s.hub.write_timeout_ms);
  hc.observer_outbox_limit = static_cast<std::size_t>(s.hub.observer_outbox_limit);
  hc.log_path = o.hub_log.empty() ? s.hub.log_path : o.hub_log;

  hub::Hub h(hc);
  const auto tcp = hub::parse_endpoint(o.bind);
  const auto ws = hub::parse_endpoint(o.ws_bind);
  h.bind(tcp, ws);
  h.start();
  out << "hub listening tcp=" << tcp.host << ":" << h.tcp_port() << " ws=" << ws.host << ":" << h.ws_port()
      << "/observe" << std::endl;
  wait_for_stop(stop);
  h.stop();
  out << "hub stopped" << std::endl;
  return kExitOk;
}

ActionRegistry registry_from(const std::string& flag, const config::Settings& s) {
  const auto& path = flag.empty() ? s.actions_registry : flag;
  return path.empty() ? ActionRegistry::seed() : ActionRegistry::load(path);
}

int cmd_robot_run(const Options& o, const CliContext& ctx, const std::atomic<bool>& stop, std::ostream& out) {
  const auto s = load_settings(o, ctx);
  robot::RobotRunnerConfig rc;
  rc.registry = registry_from(o.registry, s);
  const auto& gestures = o.gestures.empty() ? s.robot.gestures : o.gestures;
  rc.gestures = gestures.empty() ? default_gesture_rules() : load_gesture_rules(gestures);
  rc.virtual_clock = o.virtual_clock || s.robot.virtual_clock;
  rc.event_log = o.event_log.empty() ? s.robot.event_log : o.event_log;

  hub::ClientOptions co;
  co.heartbeat_interval = milliseconds(s.hub.heartbeat_interval_ms);
  robot::RobotRunner runner(std::move(rc), robot::controller_connector(hub::parse_endpoint(o.hub), co));
  runner.run(stop);
  out << "robot stopped; end flags sent: " << runner.end_flags_sent() << std::endl;
  return kExitOk;
}

std::unique_ptr<asr::Transcriber> make_transcriber(const config::Settings& s, const std::string& backend,
                                                   const std::string& manifest_fallback) {
  if (backend == "http") {
    if (s.asr.endpoint.empty()) throw Error("asr.endpoint must be set for the http backend");
    return std::make_unique<asr::HttpTranscriber>(
        asr::HttpTranscriberConfig{s.asr.endpoint, s.asr.model, s.asr.api_key, milliseconds(s.asr.timeout_ms)});
  }
  const auto& path = s.asr.mock_manifest.empty() ? manifest_fallback : s.asr.mock_manifest;
  std::vector<asr::MockManifestEntry> entries;
  if (!path.empty()) entries = asr::load_manifest(path);
  return std::make_unique<asr::MockTranscriber>(std::move(entries));
}

std::unique_ptr<dialogue::Responder> make_responder(const config::Settings& s) {
  if (s.llm.backend == "http") {
    if (s.llm.endpoint.empty()) throw Error("llm.endpoint must be set for the http backend");
    return std::make_unique<dialogue::HttpResponder>(
        dialogue::HttpResponderConfig{s.llm.endpoint, s.llm.model, s.llm.api_key, milliseconds(s.llm.timeout_ms)});
  }
  if (s.llm.scenario.empty()) {
    dialogue::MockResponder::Script script;
    script.default_reply = "I am a simulated robot. Ask me to wave, bow, nod or dance.";
    return std::make_unique<dialogue::MockResponder>(std::move(script));
  }
  return std::make_unique<dialogue::MockResponder>(dialogue::MockResponder::load(s.llm.scenario));
}

int cmd_pipeline_run(const Options& o, const CliContext& ctx, const std::atomic<bool>& stop, std::ostream& out) {
  const auto s = load_settings(o, ctx);
  const auto input = pipeline::InputSource::parse(o.input);

  std::unique_ptr<pipeline::ItemSource> source;
  std::string manifest_path;
  switch (input.kind) {
    case pipeline::InputKind::Manifest:
      manifest_path = input.path.string();
      source = std::make_unique<pipeline::ListSource>(pipeline::manifest_items(asr::load_manifest(input.path)));
      break;
    case pipeline::InputKind::WavDir:
      source = std::make_unique<pipeline::ListSource>(pipeline::wav_dir_items(input.path));
      break;
    case pipeline::InputKind::TextOnly:
      source = std::make_unique<pipeline::LineSource>(ctx.in ? *ctx.in : std::cin);
      break;
  }

  auto transcriber = make_transcriber(s, s.asr.backend, manifest_path);
  auto responder = make_responder(s);

  pipeline::PipelineConfig pc;
  pc.gate = s.gate;
  pc.hallucination_phrases = s.hallucination_phrases;
  pc.empty_retry_limit = static_cast<int>(s.pipeline.empty_retry_limit);
  pc.end_flag_timeout = milliseconds(s.pipeline.end_flag_timeout_ms);
  pc.resend_interval = milliseconds(s.pipeline.resend_interval_ms);
  pc.no_wait = o.no_wait;
  pc.serve_injections = o.serve_injections;

  hub::ClientOptions co;
  co.heartbeat_interval = milliseconds(s.pipeline.heartbeat_ms);
  dialogue::History history(s.llm.system_prompt.empty() ? std::string(dialogue::kDefaultSystemPrompt)
                                                         : s.llm.system_prompt,
                            static_cast<std::size_t>(s.llm.history_exchanges));
  pipeline::Pipeline p(pc, *transcriber, *responder, registry_from("", s), std::move(history),
                       pipeline::pipeline_connector(hub::parse_endpoint(o.hub), co));
  const auto summary = p.run_loop(*source, stop);

  const auto& summary_path = o.summary.empty() ? s.pipeline.summary_path : o.summary;
  if (!summary_path.empty()) {
    std::ofstream f(summary_path, std::ios::out | std::ios::trunc);
    if (!f) throw Error("cannot write session summary " + summary_path);
    f << summary.to_json().dump(2) << '\n';
  }
  const auto totals = summary.to_json(false)["totals"];
  out << "session " << totals.dump() << std::endl;
  return kExitOk;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

int cmd_eval_wer(const Options& o, std::ostream& out) {
  const auto r = eval::paired_wer(read_lines(o.ref), read_lines(o.hyp));
  out << "wer " << eval::format_fixed4(r.wer) << " S=" << r.totals.S << " D=" << r.totals.D << " I=" << r.totals.I
      << " N1=" << r.totals.N1 << " utterances=" << r.utterances << std::endl;
  return kExitOk;
}

int cmd_eval_bench(const Options& o, const CliContext& ctx, std::ostream& out) {
  const auto s = load_settings(o, ctx);
  const auto manifest = asr::load_manifest(o.manifest);
  auto backend = make_transcriber(s, o.backend, o.manifest);
  eval::BenchOptions opts;
  opts.gate = s.gate;
  const auto report = eval::bench_run(manifest, *backend, opts);
  eval::emit_report(report, *eval::report_format_from_string(o.format), o.out);
  out << "wrote " << report.rows.size() << " rows to " << o.out << " (failed entries: " << report.failed << ")"
      << std::endl;
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const CliContext& ctx) {
  static const std::atomic<bool> never{false};
  const std::atomic<bool>& stop = ctx.stop ? *ctx.stop : never;

  Options o;
  CLI::App app{"Speech-driven robot dialogue stack: message hub, simulated robot, pipeline, evaluation.", "pgpt"};
  app.set_version_flag("--version", PGPT_VERSION);
  app.require_subcommand(1);

  auto add_config = [&o](CLI::App* a) {
    a->add_option("--config", o.config, "JSON config file (default: $PGPT_CONFIG)");
  };

  auto* hub = app.add_subcommand("hub", "Message hub");
  hub->require_subcommand(1);
  auto* hub_serve = hub->add_subcommand("serve", "Run the hub until interrupted");
  hub_serve->add_option("--bind", o.bind, "Stream-socket listen address HOST:PORT")->capture_default_str();
  hub_serve->add_option("--ws-bind", o.ws_bind, "WebSocket (/observe) listen address HOST:PORT")
      ->capture_default_str();
  hub_serve->add_option("--log", o.hub_log, "Routing log file (overrides hub.log_path)");
  add_config(hub_serve);

  auto* robot = app.add_subcommand("robot", "Simulated robot controller");
  robot->require_subcommand(1);
  auto* robot_run = robot->add_subcommand("run", "Connect to the hub as controller and execute commands");
  robot_run->add_option("--hub", o.hub, "Hub address HOST:PORT")->capture_default_str();
  robot_run->add_option("--registry", o.registry, "Action registry JSON (overrides actions.registry)");
  robot_run->add_option("--gestures", o.gestures, "Gesture rules JSON (overrides robot.gestures)");
  robot_run->add_flag("--virtual-clock", o.virtual_clock, "Simulated time; busy periods complete instantly");
  robot_run->add_option("--event-log", o.event_log, "Event log file (overrides robot.event_log)");
  add_config(robot_run);

  auto* pipe = app.add_subcommand("pipeline", "Turn orchestration");
  pipe->require_subcommand(1);
  auto* pipe_run = pipe->add_subcommand("run", "Run turns from an input source");
  pipe_run->add_option("--hub", o.hub, "Hub address HOST:PORT")->capture_default_str();
  pipe_run->add_option("--input", o.input, "wav-dir:PATH | manifest:PATH | text-only")->required();
  pipe_run->add_flag("--no-wait", o.no_wait, "Complete turns on undeliverable notices instead of resending");
  pipe_run->add_flag("--serve-injections", o.serve_injections,
                     "Keep serving console injections after the input is exhausted");
  pipe_run->add_option("--summary", o.summary, "Session summary JSON (overrides pipeline.summary_path)");
  add_config(pipe_run);

  auto* ev = app.add_subcommand("eval", "ASR evaluation");
  ev->require_subcommand(1);
  auto* ev_wer = ev->add_subcommand("wer", "Corpus WER over paired reference/hypothesis lines");
  ev_wer->add_option("--ref", o.ref, "Reference file, one utterance per line")->required();
  ev_wer->add_option("--hyp", o.hyp, "Hypothesis file, one utterance per line")->required();
  auto* ev_bench = ev->add_subcommand("bench", "Per-group WER and recognition time over a manifest");
  ev_bench->add_option("--manifest", o.manifest, "Manifest JSON")->required();
  ev_bench->add_option("--backend", o.backend, "Transcription backend")
      ->check(CLI::IsMember({"mock", "http"}))
      ->capture_default_str();
  ev_bench->add_option("--out", o.out, "Report path")->required();
  ev_bench->add_option("--format", o.format, "Report format")
      ->check(CLI::IsMember({"csv", "structured-text"}))
      ->capture_default_str();
  add_config(ev_bench);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      app.exit(e, out, err);
      return kExitOk;
    }
    const CLI::App* deepest = &app;
    if (app.get_subcommands().empty() && !args.empty() && !args.front().starts_with("-")) {
      err << "pgpt: unknown subcommand '" << args.front() << "'\n";
    } else {
      err << "pgpt: " << e.what() << "\n";
    }
    while (!deepest->get_subcommands().empty()) deepest = deepest->get_subcommands().back();
    err << deepest->help();
    return kExitUsage;
  }

  try {
    if (*hub_serve) return cmd_hub_serve(o, ctx, stop, out);
    if (*robot_run) return cmd_robot_run(o, ctx, stop, out);
    if (*pipe_run) return cmd_pipeline_run(o, ctx, stop, out);
    if (*ev_wer) return cmd_eval_wer(o, out);
    if (*ev_bench) return cmd_eval_bench(o, ctx, out);
  } catch (const std::exception& e) {
    err << "pgpt: " << e.what() << "\n";
    return kExitRuntime;
  }
  err << "pgpt: no command selected\n";
  return kExitUsage;
}

}  // namespace pgpt::cli
