// Loopback wire-protocol peer: serves the deterministic reference linear
// model over line-delimited JSON on stdin/stdout. The misbehavior flags
// exercise the host's protocol validation.
//
//   reference_peer [--malformed] [--wrong-id] [--bad-json] [--die-after-handshake]

#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <string>

#include <json.hpp>

#include "rsdazzle/classifier.hpp"

using nlohmann::json;

int main(int argc, char** argv) {
  bool malformed = false, wrong_id = false, bad_json = false, die_early = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--malformed") malformed = true;
    else if (a == "--wrong-id") wrong_id = true;
    else if (a == "--bad-json") bad_json = true;
    else if (a == "--die-after-handshake") die_early = true;
    else {
      std::cerr << "unknown flag: " << a << "\n";
      return 1;
    }
  }

  constexpr int kClasses = 10;
  std::cout << json{{"classes", kClasses}}.dump() << "\n" << std::flush;
  if (die_early) return 0;

  // Models are shaped per request; cache by shape.
  std::map<std::string, std::unique_ptr<rsdazzle::LinearModel>> models;

  std::string line;
  while (std::getline(std::cin, line)) {
    json req = json::parse(line, nullptr, false);
    if (req.is_discarded()) return 1;

    const auto shape = req["shape"];
    const int h = shape[0], w = shape[1], c = shape[2];
    const std::string key = std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
    auto it = models.find(key);
    if (it == models.end())
      it = models.emplace(key, std::make_unique<rsdazzle::LinearModel>(
                                   rsdazzle::make_reference_linear(h, w, c, kClasses)))
               .first;

    rsdazzle::Image x(h, w, c);
    x.data = req["pixels"].get<std::vector<double>>();

    json reply;
    reply["id"] = wrong_id ? req["id"].get<long long>() + 1 : req["id"].get<long long>();
    if (req["op"] == "logits") {
      if (!malformed) reply["logits"] = it->second->logits(x);
    } else if (req["op"] == "grad") {
      if (!malformed) reply["grad"] = it->second->input_gradient(x, req["label"].get<int>()).data;
    } else {
      return 1;
    }

    if (bad_json)
      std::cout << "{this is not json\n" << std::flush;
    else
      std::cout << reply.dump() << "\n" << std::flush;
  }
  return 0;
}
