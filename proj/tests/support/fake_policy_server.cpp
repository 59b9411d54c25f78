// Stand-in for an external model behind the logits bridge. Reads one JSON
// request per line and answers with a score per vocabulary token.
//
//   fake_policy_server [--vocab N] [--oracle tokens.bin] [--fault bad-id|short|garbage|error|exit]
//                      [--fault-after K] [--log requests.jsonl]

#include "procinv/codec.hpp"

#include <json.hpp>

#include <fstream>
#include <iostream>
#include <string>

int main(int argc, char **argv) {
    std::uint32_t vocab = 3435;
    std::string oracle_path, fault, log_path;
    long fault_after = 0;
    for (int i = 1; i + 1 < argc; i += 2) {
        const std::string flag = argv[i];
        const std::string value = argv[i + 1];
        if (flag == "--vocab") {
            vocab = static_cast<std::uint32_t>(std::stoul(value));
        } else if (flag == "--oracle") {
            oracle_path = value;
        } else if (flag == "--fault") {
            fault = value;
        } else if (flag == "--fault-after") {
            fault_after = std::stol(value);
        } else if (flag == "--log") {
            log_path = value;
        } else {
            std::cerr << "unknown flag " << flag << "\n";
            return 2;
        }
    }
    procinv::TokenSequence target;
    if (!oracle_path.empty()) {
        std::ifstream in(oracle_path, std::ios::binary);
        target = procinv::read_token_sequence(in);
    }
    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path);
    }

    std::string line;
    long served = 0;
    while (std::getline(std::cin, line)) {
        const auto request = nlohmann::json::parse(line);
        if (log.is_open()) {
            log << request.dump() << "\n" << std::flush;
        }
        const auto prefix = request.at("prefix").get<std::vector<std::uint32_t>>();
        std::vector<double> scores(vocab, 0.0);
        if (prefix.size() < target.size() && target[prefix.size()] < vocab) {
            scores[target[prefix.size()]] = 10.0;
        }
        nlohmann::json reply = {{"id", request.at("id")}, {"scores", scores}};
        if (served++ >= fault_after && !fault.empty()) {
            if (fault == "exit") {
                return 0;
            }
            if (fault == "garbage") {
                std::cout << "not json\n" << std::flush;
                continue;
            }
            if (fault == "bad-id") {
                reply["id"] = request.at("id").get<long>() + 1;
            } else if (fault == "short") {
                reply["scores"] = std::vector<double>(vocab - 1, 0.0);
            } else if (fault == "error") {
                reply = {{"id", request.at("id")}, {"error", "model unavailable"}};
            }
        }
        std::cout << reply.dump() << "\n" << std::flush;
    }
    return 0;
}
