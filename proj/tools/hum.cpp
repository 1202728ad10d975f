#include <unistd.h>

#include <csignal>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "hum/http_server.hpp"
#include "hum/session.hpp"

namespace {

/// Paren depth of `text`, ignoring comments.
int depth(const std::string& text) {
  int d = 0;
  bool comment = false;
  for (char c : text) {
    if (comment) {
      comment = c != '\n';
    } else if (c == ';') {
      comment = true;
    } else if (c == '(') {
      ++d;
    } else if (c == ')') {
      --d;
    }
  }
  return d;
}

int repl(const hum::SessionOptions& options) {
  hum::Session session(options);
  bool interactive = isatty(STDIN_FILENO);
  std::string buffer;
  std::string line;
  for (;;) {
    if (interactive) std::cout << (buffer.empty() ? "hum> " : "...  ") << std::flush;
    if (!std::getline(std::cin, line)) break;
    buffer += line + "\n";
    if (depth(buffer) > 0) continue;
    try {
      for (const auto& result : session.execute(buffer))
        for (const auto& out : result.lines) std::cout << out << "\n";
    } catch (const hum::Error& e) {
      std::cout << "error: " << e.what() << "\n";
    }
    buffer.clear();
  }
  return 0;
}

int run(const std::string& path, const hum::ScriptOptions& options) {
  auto result = hum::run_script(path, options);
  std::cout << result.output;
  for (const auto& e : result.errors) std::cerr << path << ":" << e << "\n";
  return result.status;
}

int serve(int port, const std::string& host, const hum::SessionOptions& options) {
  httplib::Server server;
  auto service = std::make_shared<hum::SessionService>(options);
  hum::install_routes(server, service);
  std::cerr << "hum: serving on http://" << host << ":" << port << "\n";
  if (!server.listen(host, port)) {
    std::cerr << "hum: cannot listen on " << host << ":" << port << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hum - symbolic probabilistic inference over an assumption-based TMS"};
  app.require_subcommand(1);

  hum::SessionOptions session;
  session.precision = hum::display_precision_from_env();

  app.add_subcommand("repl", "Interactive command loop on stdin");

  auto* run_cmd = app.add_subcommand("run", "Run a script of commands");
  std::string script;
  hum::ScriptOptions script_options;
  bool quiet = false;
  run_cmd->add_option("script", script, "Script file")->required();
  run_cmd->add_flag("--verify", script_options.session.verify, "Cross-check every query against brute-force enumeration");
  run_cmd->add_flag("--keep-going", script_options.keep_going, "Continue after a failing command");
  run_cmd->add_flag("-q,--quiet", quiet, "Print command output only, without echoing commands");

  auto* serve_cmd = app.add_subcommand("serve", "Serve sessions over HTTP/JSON");
  int port = 8080;
  std::string host = "127.0.0.1";
  serve_cmd->add_option("--port", port, "TCP port")->required();
  serve_cmd->add_option("--host", host, "Bind address");

  CLI11_PARSE(app, argc, argv);

  if (app.got_subcommand("repl")) return repl(session);
  if (app.got_subcommand("run")) {
    script_options.session.precision = session.precision;
    script_options.echo = !quiet;
    return run(script, script_options);
  }
  return serve(port, host, session);
}
