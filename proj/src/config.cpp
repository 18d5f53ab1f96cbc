#include "dsc/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "dsc/errors.hpp"

namespace dsc {
namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <class T>
T parse_value(const std::string& key, const std::string& text) {
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw InvalidConfig("config: bad value '" + text + "' for key '" + key + "'");
    }
    return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw InvalidConfig("config: bad boolean '" + text + "' for key '" + key + "'");
}

std::vector<std::size_t> parse_widths(const std::string& key, const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(parse_value<std::size_t>(key, item));
    }
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    auto size_field = [](std::size_t RunConfig::*field) {
        return Setter([field](RunConfig& c, const std::string& k, const std::string& v) {
            c.*field = parse_value<std::size_t>(k, v);
        });
    };
    auto real_field = [](double RunConfig::*field) {
        return Setter([field](RunConfig& c, const std::string& k, const std::string& v) {
            c.*field = parse_value<double>(k, v);
        });
    };
    static const std::map<std::string, Setter> table{
        {"embedding_dim", size_field(&RunConfig::embedding_dim)},
        {"hidden_widths", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.hidden_widths = parse_widths(k, v);
         }},
        {"neighbors", size_field(&RunConfig::neighbors)},
        {"a_hat", real_field(&RunConfig::a_hat)},
        {"t_max", size_field(&RunConfig::t_max)},
        {"pretrain_epochs", size_field(&RunConfig::pretrain_epochs)},
        {"pretrain_batch", size_field(&RunConfig::pretrain_batch)},
        {"train_batch", size_field(&RunConfig::train_batch)},
        {"batches_per_iter", size_field(&RunConfig::batches_per_iter)},
        {"chunk_size", size_field(&RunConfig::chunk_size)},
        {"clusters", size_field(&RunConfig::clusters)},
        {"convergence_threshold", real_field(&RunConfig::convergence_threshold)},
        {"max_outer_iters", size_field(&RunConfig::max_outer_iters)},
        {"n_init", size_field(&RunConfig::n_init)},
        {"seed", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.seed = parse_value<std::uint64_t>(k, v);
         }},
        {"lr", real_field(&RunConfig::lr)},
        {"beta1", real_field(&RunConfig::beta1)},
        {"beta2", real_field(&RunConfig::beta2)},
        {"final_kmeans", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.final_kmeans = parse_bool(k, v);
         }},
    };
    return table;
}

}  // namespace

void validate(const RunConfig& cfg) {
    auto positive = [](std::size_t v, const char* name) {
        if (v == 0) throw InvalidConfig(std::string("config: ") + name + " must be positive");
    };
    positive(cfg.embedding_dim, "embedding_dim");
    positive(cfg.neighbors, "neighbors");
    positive(cfg.t_max, "t_max");
    positive(cfg.pretrain_batch, "pretrain_batch");
    positive(cfg.train_batch, "train_batch");
    positive(cfg.batches_per_iter, "batches_per_iter");
    positive(cfg.chunk_size, "chunk_size");
    positive(cfg.max_outer_iters, "max_outer_iters");
    positive(cfg.n_init, "n_init");
    for (std::size_t w : cfg.hidden_widths) positive(w, "hidden_widths entry");
    if (cfg.chunk_size != cfg.train_batch * cfg.batches_per_iter) {
        throw InvalidConfig("config: chunk_size (" + std::to_string(cfg.chunk_size) +
                            ") must equal train_batch * batches_per_iter (" +
                            std::to_string(cfg.train_batch * cfg.batches_per_iter) + ")");
    }
    if (!(cfg.a_hat > 0.0)) throw InvalidConfig("config: a_hat must be positive");
    if (!(cfg.convergence_threshold > 0.0 && cfg.convergence_threshold <= 1.0)) {
        throw InvalidConfig("config: convergence_threshold must lie in (0, 1]");
    }
    if (!(cfg.lr >= 0.0)) throw InvalidConfig("config: lr must be non-negative");
    if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
        throw InvalidConfig("config: beta1 and beta2 must lie in [0, 1)");
    }
}

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InvalidConfig("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) {
            throw InvalidConfig("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
        it->second(cfg, key, value);
    }
    validate(cfg);
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string format_config(const RunConfig& cfg) {
    std::ostringstream os;
    os.precision(17);
    os << "embedding_dim = " << cfg.embedding_dim << '\n';
    os << "hidden_widths = ";
    for (std::size_t i = 0; i < cfg.hidden_widths.size(); ++i) os << (i ? "," : "") << cfg.hidden_widths[i];
    os << '\n';
    os << "neighbors = " << cfg.neighbors << '\n';
    os << "a_hat = " << cfg.a_hat << '\n';
    os << "t_max = " << cfg.t_max << '\n';
    os << "pretrain_epochs = " << cfg.pretrain_epochs << '\n';
    os << "pretrain_batch = " << cfg.pretrain_batch << '\n';
    os << "train_batch = " << cfg.train_batch << '\n';
    os << "batches_per_iter = " << cfg.batches_per_iter << '\n';
    os << "chunk_size = " << cfg.chunk_size << '\n';
    os << "clusters = " << cfg.clusters << '\n';
    os << "convergence_threshold = " << cfg.convergence_threshold << '\n';
    os << "max_outer_iters = " << cfg.max_outer_iters << '\n';
    os << "n_init = " << cfg.n_init << '\n';
    os << "seed = " << cfg.seed << '\n';
    os << "lr = " << cfg.lr << '\n';
    os << "beta1 = " << cfg.beta1 << '\n';
    os << "beta2 = " << cfg.beta2 << '\n';
    os << "final_kmeans = " << (cfg.final_kmeans ? "true" : "false") << '\n';
    return os.str();
}

}  // namespace dsc
