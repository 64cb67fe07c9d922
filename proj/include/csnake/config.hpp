#pragma once

// Run configuration: a purpose-built reader for the config dialect used by
// the training/eval tooling (scalar values, one nesting level for the
// train/test sections, parenthesized tuples, a single inline dict for the
// head widths), plus the trailing `key value` override grammar and the
// dataset registration file.

#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include <json.hpp>

#include "csnake/common.hpp"

namespace csnake {

struct DatasetEntry {
    std::string id = "coco";
    std::string data_root;
    std::string ann_file;
    std::string split = "train";
};

using DatasetRegistry = std::map<std::string, DatasetEntry>;

struct RunConfig {
    // run identity
    std::string model = "coco";
    std::string network = "hg_small";
    std::string task = "circle_snake";
    bool resume = false;
    std::string gpus = "(0,)";       // accepted for file compatibility; CPU-only build
    std::string pretrain;            // accepted and ignored with a warning
    bool rotate_reproduce = false;   // accepted and ignored with a warning

    // head widths: {'ct_hm': C, 'radius': 1, 'reg': 2}
    int heads_ct_hm = 4;
    int heads_radius = 1;
    int heads_reg = 2;

    std::string segm_or_bbox = "segm";
    double ct_score = 0.05;
    int save_ep = 5;
    int eval_ep = 5;
    bool dice = false;
    bool save_images = false;
    bool debug = false;

    // train section
    std::string optim = "adam";
    double lr = 2.5e-4;
    std::vector<int> milestones = {60, 80, 100, 150};
    double gamma = 0.5;
    int batch_size = 1;
    std::string train_dataset = "eoeTrain";
    int num_workers = 1;
    int epochs = 200;
    double weight_decay = 0.0;

    // test section
    std::string test_dataset = "eoeTest";
    int test_batch_size = 1;
    int test_epoch = -1;  // -1 means newest checkpoint

    // model hyperparameters
    int seed = 1234;
    int down_ratio = 4;
    int vertices = 128;
    int deform_iters = 3;
    int top_n = 100;
    double lambda_radius = 0.1;
    double lambda_off = 1.0;
    double focal_alpha = 2.0;
    double focal_beta = 4.0;
    double iter_weight = 1.0;
    int snake_width = 64;
    std::vector<int> backbone_widths = {16, 32, 64, 128};  // stem, then the 3 down blocks
    int head_conv = 32;
    int snake_instances = 4;
    double proposal_jitter = 0.1;

    std::string catalog;  // dataset registration file (JSON)
    std::string model_dir = "out";
    std::string model_selector = "ap50";  // or 'loss'

    std::vector<std::string> warnings;

    int class_count() const { return heads_ct_hm; }

    void validate() const {
        if (heads_ct_hm < 1) throw IoError("config: heads ct_hm must be >= 1");
        if (heads_radius != 1) throw IoError("config: heads radius width must be 1");
        if (heads_reg != 2) throw IoError("config: heads reg width must be 2");
        if (save_ep < 1 || eval_ep < 1) throw IoError("config: save_ep and eval_ep must be >= 1");
        if (optim != "adam") throw IoError("config: unsupported optimizer '" + optim + "'");
        if (segm_or_bbox != "segm" && segm_or_bbox != "bbox" && segm_or_bbox != "circle")
            throw IoError("config: segm_or_bbox must be segm, bbox or circle");
        if (down_ratio != 4) throw IoError("config: down_ratio must be 4 (backbone output stride)");
        if (vertices < 3) throw IoError("config: vertices must be >= 3");
        if (deform_iters < 1) throw IoError("config: deform_iters must be >= 1");
        if (backbone_widths.size() != 4) throw IoError("config: backbone_widths needs 4 entries");
        if (model_selector != "ap50" && model_selector != "loss")
            throw IoError("config: model_selector must be ap50 or loss");
        if (batch_size < 1 || test_batch_size < 1) throw IoError("config: batch sizes must be >= 1");
        if (epochs < 1) throw IoError("config: train epoch count must be >= 1");
    }
};

namespace cfgdetail {

inline std::string strip(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::string strip_comment(const std::string& line) {
    bool in_quote = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '\'') in_quote = !in_quote;
        if (line[i] == '#' && !in_quote) return line.substr(0, i);
    }
    return line;
}

inline std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '\'' && s.back() == '\'') return s.substr(1, s.size() - 2);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
}

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "True") return true;
    if (v == "false" || v == "False") return false;
    throw IoError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

inline int parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        int r = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (...) {
        throw IoError("config: key '" + key + "' expects an integer, got '" + v + "'");
    }
}

inline double parse_real(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        double r = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (...) {
        throw IoError("config: key '" + key + "' expects a number, got '" + v + "'");
    }
}

inline std::vector<int> parse_int_tuple(const std::string& v, const std::string& key) {
    std::string s = strip(v);
    if (s.size() < 2 || s.front() != '(' || s.back() != ')')
        throw IoError("config: key '" + key + "' expects a parenthesized tuple, got '" + v + "'");
    std::vector<int> out;
    std::string inner = s.substr(1, s.size() - 2);
    std::stringstream ss(inner);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = strip(item);
        if (item.empty()) continue;  // trailing comma in one-element tuples
        out.push_back(parse_int(item, key));
    }
    return out;
}

inline std::string format_int_tuple(const std::vector<int>& v) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < v.size(); ++i) os << v[i] << (i + 1 < v.size() ? ", " : "");
    if (v.size() == 1) os << ",";
    os << ")";
    return os.str();
}

inline std::string format_real(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

// {'ct_hm': 4, 'radius': 1, 'reg': 2}
inline void parse_heads_dict(const std::string& v, RunConfig& cfg) {
    std::string s = strip(v);
    if (s.size() < 2 || s.front() != '{' || s.back() != '}')
        throw IoError("config: 'heads' expects an inline dict, got '" + v + "'");
    std::stringstream ss(s.substr(1, s.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto colon = item.find(':');
        if (colon == std::string::npos) throw IoError("config: malformed heads entry '" + item + "'");
        std::string k = unquote(strip(item.substr(0, colon)));
        int val = parse_int(strip(item.substr(colon + 1)), "heads." + k);
        if (k == "ct_hm")
            cfg.heads_ct_hm = val;
        else if (k == "radius")
            cfg.heads_radius = val;
        else if (k == "reg")
            cfg.heads_reg = val;
        else
            throw IoError("config: unknown head '" + k + "'");
    }
}

}  // namespace cfgdetail

// Applies one `key value` assignment (dotted section syntax). Shared by the
// file parser and the command-line override grammar.
inline void config_set(RunConfig& cfg, const std::string& key, const std::string& raw_value) {
    using namespace cfgdetail;
    std::string v = strip(raw_value);
    auto warn = [&cfg](const std::string& msg) { cfg.warnings.push_back(msg); };

    if (key == "model") cfg.model = unquote(v);
    else if (key == "network") cfg.network = unquote(v);
    else if (key == "task") cfg.task = unquote(v);
    else if (key == "resume") cfg.resume = parse_bool(v, key);
    else if (key == "gpus") cfg.gpus = v;
    else if (key == "pretrain") {
        cfg.pretrain = unquote(v);
        if (!cfg.pretrain.empty())
            warn("pretrain '" + cfg.pretrain + "' ignored: pretrained backbones are not supported");
    } else if (key == "rotate_reproduce") {
        cfg.rotate_reproduce = parse_bool(v, key);
        if (cfg.rotate_reproduce) warn("rotate_reproduce ignored: rotation reproduction is not supported");
    } else if (key == "heads") parse_heads_dict(v, cfg);
    else if (key == "segm_or_bbox") cfg.segm_or_bbox = unquote(v);
    else if (key == "ct_score") cfg.ct_score = parse_real(v, key);
    else if (key == "save_ep") cfg.save_ep = parse_int(v, key);
    else if (key == "eval_ep") cfg.eval_ep = parse_int(v, key);
    else if (key == "dice") cfg.dice = parse_bool(v, key);
    else if (key == "save_images") cfg.save_images = parse_bool(v, key);
    else if (key == "debug" || key == "debug_train" || key == "debug_test") cfg.debug = parse_bool(v, key);
    else if (key == "train.optim") cfg.optim = unquote(v);
    else if (key == "train.lr") cfg.lr = parse_real(v, key);
    else if (key == "train.milestones") cfg.milestones = parse_int_tuple(v, key);
    else if (key == "train.gamma") cfg.gamma = parse_real(v, key);
    else if (key == "train.batch_size") cfg.batch_size = parse_int(v, key);
    else if (key == "train.dataset") cfg.train_dataset = unquote(v);
    else if (key == "train.num_workers") cfg.num_workers = parse_int(v, key);
    else if (key == "train.epoch") cfg.epochs = parse_int(v, key);
    else if (key == "train.weight_decay") cfg.weight_decay = parse_real(v, key);
    else if (key == "test.dataset") cfg.test_dataset = unquote(v);
    else if (key == "test.batch_size") cfg.test_batch_size = parse_int(v, key);
    else if (key == "test.epoch") cfg.test_epoch = parse_int(v, key);
    else if (key == "seed") cfg.seed = parse_int(v, key);
    else if (key == "down_ratio") cfg.down_ratio = parse_int(v, key);
    else if (key == "vertices") cfg.vertices = parse_int(v, key);
    else if (key == "deform_iters") cfg.deform_iters = parse_int(v, key);
    else if (key == "top_n") cfg.top_n = parse_int(v, key);
    else if (key == "lambda_radius") cfg.lambda_radius = parse_real(v, key);
    else if (key == "lambda_off") cfg.lambda_off = parse_real(v, key);
    else if (key == "focal_alpha") cfg.focal_alpha = parse_real(v, key);
    else if (key == "focal_beta") cfg.focal_beta = parse_real(v, key);
    else if (key == "iter_weight") cfg.iter_weight = parse_real(v, key);
    else if (key == "snake_width") cfg.snake_width = parse_int(v, key);
    else if (key == "backbone_widths") cfg.backbone_widths = parse_int_tuple(v, key);
    else if (key == "head_conv") cfg.head_conv = parse_int(v, key);
    else if (key == "snake_instances") cfg.snake_instances = parse_int(v, key);
    else if (key == "proposal_jitter") cfg.proposal_jitter = parse_real(v, key);
    else if (key == "catalog") cfg.catalog = unquote(v);
    else if (key == "model_dir") cfg.model_dir = unquote(v);
    else if (key == "model_selector") cfg.model_selector = unquote(v);
    else throw IoError("config: unknown key '" + key + "'");
}

inline RunConfig parse_config(const std::string& text) {
    using namespace cfgdetail;
    RunConfig cfg;
    std::istringstream is(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string body = strip_comment(line);
        std::string t = strip(body);
        if (t.empty()) continue;
        bool indented = body[0] == ' ' || body[0] == '\t';
        auto colon = t.find(':');
        if (colon == std::string::npos)
            throw IoError("config: line " + std::to_string(lineno) + " is not a 'key: value' pair");
        std::string key = strip(t.substr(0, colon));
        std::string value = strip(t.substr(colon + 1));
        if (value.empty()) {
            if (key != "train" && key != "test")
                throw IoError("config: unknown section '" + key + "' at line " + std::to_string(lineno));
            section = key;
            continue;
        }
        if (!indented) section.clear();
        std::string full = section.empty() ? key : section + "." + key;
        config_set(cfg, full, value);
    }
    cfg.validate();
    return cfg;
}

inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

// Trailing `key value` override pairs after the flags, mirroring the run
// parameter style of the training/testing tools.
inline void apply_overrides(RunConfig& cfg, const std::vector<std::string>& tokens) {
    if (tokens.size() % 2 != 0)
        throw IoError("overrides: expected `key value` pairs, got an odd token count");
    for (std::size_t i = 0; i < tokens.size(); i += 2) config_set(cfg, tokens[i], tokens[i + 1]);
    cfg.validate();
}

inline std::string serialize_config(const RunConfig& cfg) {
    using namespace cfgdetail;
    std::ostringstream os;
    os << "model: '" << cfg.model << "'\n";
    os << "network: '" << cfg.network << "'\n";
    os << "task: '" << cfg.task << "'\n";
    os << "resume: " << (cfg.resume ? "true" : "false") << "\n";
    os << "gpus: " << cfg.gpus << "\n";
    os << "\n";
    os << "train:\n";
    os << "    optim: '" << cfg.optim << "'\n";
    os << "    lr: " << format_real(cfg.lr) << "\n";
    os << "    milestones: " << format_int_tuple(cfg.milestones) << "\n";
    os << "    gamma: " << format_real(cfg.gamma) << "\n";
    os << "    batch_size: " << cfg.batch_size << "\n";
    os << "    dataset: '" << cfg.train_dataset << "'\n";
    os << "    num_workers: " << cfg.num_workers << "\n";
    os << "    epoch: " << cfg.epochs << "\n";
    os << "    weight_decay: " << format_real(cfg.weight_decay) << "\n";
    os << "test:\n";
    os << "    dataset: '" << cfg.test_dataset << "'\n";
    os << "    batch_size: " << cfg.test_batch_size << "\n";
    os << "    epoch: " << cfg.test_epoch << "\n";
    os << "\n";
    os << "heads: {'ct_hm': " << cfg.heads_ct_hm << ", 'radius': " << cfg.heads_radius
       << ", 'reg': " << cfg.heads_reg << "}\n";
    os << "segm_or_bbox: '" << cfg.segm_or_bbox << "'\n";
    os << "ct_score: " << format_real(cfg.ct_score) << "\n";
    os << "save_ep: " << cfg.save_ep << "\n";
    os << "eval_ep: " << cfg.eval_ep << "\n";
    os << "dice: " << (cfg.dice ? "true" : "false") << "\n";
    os << "save_images: " << (cfg.save_images ? "true" : "false") << "\n";
    os << "debug: " << (cfg.debug ? "true" : "false") << "\n";
    os << "\n";
    os << "seed: " << cfg.seed << "\n";
    os << "down_ratio: " << cfg.down_ratio << "\n";
    os << "vertices: " << cfg.vertices << "\n";
    os << "deform_iters: " << cfg.deform_iters << "\n";
    os << "top_n: " << cfg.top_n << "\n";
    os << "lambda_radius: " << format_real(cfg.lambda_radius) << "\n";
    os << "lambda_off: " << format_real(cfg.lambda_off) << "\n";
    os << "focal_alpha: " << format_real(cfg.focal_alpha) << "\n";
    os << "focal_beta: " << format_real(cfg.focal_beta) << "\n";
    os << "iter_weight: " << format_real(cfg.iter_weight) << "\n";
    os << "snake_width: " << cfg.snake_width << "\n";
    os << "backbone_widths: " << format_int_tuple(cfg.backbone_widths) << "\n";
    os << "head_conv: " << cfg.head_conv << "\n";
    os << "snake_instances: " << cfg.snake_instances << "\n";
    os << "proposal_jitter: " << format_real(cfg.proposal_jitter) << "\n";
    if (!cfg.catalog.empty()) os << "catalog: '" << cfg.catalog << "'\n";
    os << "model_dir: '" << cfg.model_dir << "'\n";
    os << "model_selector: '" << cfg.model_selector << "'\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// dataset registration file (JSON), mirroring the name -> {id, data_root,
// ann_file, split} catalog layout

inline DatasetRegistry load_registry(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("registry: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        throw IoError("registry: malformed JSON in '" + path + "': " + e.what());
    }
    if (!j.is_object()) throw IoError("registry: expected an object of dataset entries");
    DatasetRegistry reg;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& v = it.value();
        DatasetEntry e;
        e.id = v.value("id", "coco");
        if (!v.contains("data_root") || !v.contains("ann_file") || !v.contains("split"))
            throw IoError("registry: entry '" + it.key() + "' needs data_root, ann_file and split");
        e.data_root = v["data_root"].get<std::string>();
        e.ann_file = v["ann_file"].get<std::string>();
        e.split = v["split"].get<std::string>();
        reg[it.key()] = e;
    }
    return reg;
}

inline void save_registry(const DatasetRegistry& reg, const std::string& path) {
    nlohmann::ordered_json j;
    for (const auto& [name, e] : reg)
        j[name] = {{"id", e.id}, {"data_root", e.data_root}, {"ann_file", e.ann_file}, {"split", e.split}};
    std::ofstream os(path);
    if (!os) throw IoError("registry: cannot write '" + path + "'");
    os << j.dump(4) << "\n";
}

inline const DatasetEntry& resolve_dataset(const DatasetRegistry& reg, const std::string& name) {
    auto it = reg.find(name);
    if (it == reg.end()) throw IoError("registry: dataset '" + name + "' is not registered");
    return it->second;
}

}  // namespace csnake
