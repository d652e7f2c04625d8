// Line-protocol backend that answers every request with the identity pose.
// Used to exercise the process transport; the knobs below inject the
// failure modes the host has to survive.

#include <chrono>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "pose_consensus/protocol.hpp"

int main(int argc, char** argv) {
  namespace pc = pose_consensus;
  CLI::App app{"identity-pose estimator backend"};
  std::string version = "1";
  std::string call_log;
  std::string fail_substring;
  int protocol = pc::kProtocolVersion;
  int delay_ms = 0;
  double drift = 0.0;
  bool no_hello = false;
  bool malformed = false;
  bool wrong_id = false;
  app.add_option("--version-string", version, "version reported in hello");
  app.add_option("--protocol", protocol, "protocol number reported in hello");
  app.add_option("--call-log", call_log, "append one line per handled request");
  app.add_option("--delay-ms", delay_ms, "sleep before each response");
  app.add_option("--drift", drift, "add this to rotation[0][1] of every response");
  app.add_option("--fail-matching", fail_substring, "answer status failed when the id contains this");
  app.add_flag("--no-hello", no_hello, "exit without sending hello");
  app.add_flag("--malformed", malformed, "answer with a line that is not a result");
  app.add_flag("--wrong-id", wrong_id, "answer with a mismatched id");
  CLI11_PARSE(app, argc, argv);

  if (no_hello) return 0;
  std::cout << pc::serialize_hello({protocol, "echo", version}) << std::endl;
  std::string line;
  if (!std::getline(std::cin, line) || !pc::is_hello_ack(line)) return 1;

  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    pc::EstimatorResponse resp;
    try {
      const pc::EstimatorRequest req = pc::parse_request(line);
      resp.request_id = req.request_id;
      if (!call_log.empty()) {
        std::ofstream log(call_log, std::ios::app);
        log << req.request_id << ' ' << req.frames.size() << '\n';
      }
      const bool fail = !fail_substring.empty() && req.request_id.find(fail_substring) != std::string::npos;
      resp.status = fail ? pc::ResponseStatus::failed : pc::ResponseStatus::ok;
    } catch (const pc::Error&) {
      resp.status = pc::ResponseStatus::failed;
    }
    resp.rotation(0, 1) += drift;
    if (wrong_id) resp.request_id += "-x";
    if (delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
    if (malformed) {
      std::cout << "{\"type\":\"oops\"}" << std::endl;
    } else {
      std::cout << pc::serialize_response(resp) << std::endl;
    }
  }
  return 0;
}
