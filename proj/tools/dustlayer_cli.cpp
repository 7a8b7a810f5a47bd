// Copyright (c) 2026 dustlayer contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Batch front end: reads a JSON run configuration, dispatches the requested
// mode, and emits all artifacts plus a manifest into the output directory.
//
// Exit codes: 0 success, 2 configuration error, 3 condition-1 failure,
// 4 condition-2 failure, 5 numerical failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>

#include "dustlayer/config.hpp"
#include "dustlayer/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"dustlayer: polydisperse impurity transport, asymptotics vs direct solve"};

  std::string config_path;
  std::string mode_override;
  std::string out_override;
  int threads_override = -1;

  app.add_option("config", config_path, "run configuration file (JSON)")->required();
  app.add_option("--mode", mode_override,
                 "override mode: spectrum|check|asymptotic|direct|compare|converge");
  app.add_option("--out", out_override, "override output directory");
  app.add_option("--threads", threads_override, "cap worker threads (0 = hardware)");

  CLI11_PARSE(app, argc, argv);

  try {
    dustlayer::RunConfig cfg = dustlayer::RunConfig::from_file(config_path);
    if (!mode_override.empty()) cfg.mode = dustlayer::parse_mode(mode_override);
    if (const char* env = std::getenv("DUSTLAYER_OUT"); env && *env) cfg.output_dir = env;
    if (!out_override.empty()) cfg.output_dir = out_override;
    if (threads_override >= 0) cfg.threads = threads_override;
    cfg.validate();

    const dustlayer::RunResult result = dustlayer::run(cfg);
    if (!result.message.empty()) std::cerr << "dustlayer: " << result.message << "\n";
    for (const auto& name : result.outputs)
      std::cout << cfg.output_dir << "/" << name << "\n";
    return result.exit_code;
  } catch (const dustlayer::Error& e) {
    std::cerr << "dustlayer: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "dustlayer: unexpected failure: " << e.what() << "\n";
    return static_cast<int>(dustlayer::ExitCode::numerical_failure);
  }
}
