#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>

#include "evontree/config.hpp"
#include "evontree/error.hpp"

// Serves the synthetic model over the HTTP wire contract.
int main(int argc, char** argv) {
  CLI::App app{"Synthetic model server"};
  std::string config;
  std::string host = "127.0.0.1";
  int port = 8089;
  bool judge = false;
  app.add_option("--config", config, "config whose model.synthetic section defines the model")->required();
  app.add_option("--host", host);
  app.add_option("--port", port);
  app.add_flag("--judge", judge, "answer as the ground-truth judge");
  CLI11_PARSE(app, argc, argv);

  std::shared_ptr<evontree::SyntheticModel> model;
  try {
    const auto cfg = evontree::Config::load(config);
    const auto& sc = cfg.model.synthetic;
    auto truth = std::make_shared<evontree::GroundTruth>(
        evontree::sample_ground_truth(sc.depth, sc.branching, sc.synonym_rate, sc.seed, sc.roots));
    model = std::make_shared<evontree::SyntheticModel>(truth, sc.noise, sc.generation, sc.seed,
                                                       judge ? evontree::SyntheticRole::Judge
                                                             : evontree::SyntheticRole::Model);
  } catch (const evontree::Error& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }

  httplib::Server server;
  auto handler = [model](const std::string& path) {
    return [model, path](const httplib::Request& req, httplib::Response& res) {
      try {
        res.set_content(model->post(path, req.body), "application/json");
      } catch (const evontree::Error& e) {
        res.status = 400;
        res.set_content(e.what(), "text/plain");
      }
    };
  };
  server.Post(evontree::kGeneratePath, handler(evontree::kGeneratePath));
  server.Post(evontree::kScorePath, handler(evontree::kScorePath));
  std::cerr << "listening on " << host << ':' << port << '\n';
  return server.listen(host, port) ? 0 : 1;
}
