#include "ctxnmt/config.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

namespace ctxnmt {

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys{
      {"train_src", "", "training source text, one tokenized sentence per line"},
      {"train_tgt", "", "training target text"},
      {"dev_src", "", "development source text (defaults to the training data)"},
      {"dev_tgt", "", "development target text"},
      {"src_vocab_size", "50000", "source vocabulary limit"},
      {"tgt_vocab_size", "50000", "target vocabulary limit"},
      {"embed_dim", "500", "word embedding size d"},
      {"hidden", "500", "decoder hidden size; a bi encoder uses hidden/2 per direction"},
      {"encoder", "bi", "encoder direction: uni|bi"},
      {"enc_layers", "2", "stacked encoder layers"},
      {"dec_layers", "2", "stacked decoder layers"},
      {"context", "none", "context network: none|nbow|bilstm|holstm"},
      {"integration", "concat", "context integration: gate|concat"},
      {"context_hidden", "0", "BiLSTM context units per direction (0 = embed_dim/2)"},
      {"dropout", "0.3", "dropout between stacked layers"},
      {"lr", "1.0", "initial SGD learning rate"},
      {"clip_norm", "5", "global gradient norm threshold"},
      {"batch_size", "256", "maximum sentences per batch"},
      {"max_length", "50", "drop training pairs longer than this"},
      {"converge_delta", "0.01", "stop when dev perplexity moves less than this"},
      {"max_epochs", "20", "epoch limit"},
      {"init_range", "0.1", "uniform initialization range"},
      {"precision", "double", "training precision: double|float"},
      {"seed", "1", "random seed"},
      {"beam", "5", "beam width"},
      {"max_len_factor", "2", "decode at most factor * source length + 5 tokens"},
  };
  return keys;
}

RunConfig::RunConfig() {
  for (const auto& k : config_keys()) values_[k.name] = k.default_value;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open config '" + path.string() + "'");
  RunConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config '" + path.string() + "' line " + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    try {
      cfg.set(key, trim(std::string_view(line).substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return cfg;
}

void RunConfig::set(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!values_.count(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::get_double(const std::string& key) const {
  const auto& v = get(key);
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
  return d;
}

long long RunConfig::get_int(const std::string& key) const {
  const auto& v = get(key);
  long long n = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw ConfigError("config key '" + key + "': '" + v + "' is not an integer");
  return n;
}

std::uint64_t RunConfig::get_seed() const {
  const auto n = get_int("seed");
  if (n < 0) throw ConfigError("config key 'seed' must be non-negative");
  return static_cast<std::uint64_t>(n);
}

void RunConfig::write(std::ostream& out) const {
  for (const auto& k : config_keys()) {
    const auto& v = values_.at(k.name);
    out << k.name << (v.empty() ? " =" : " = ") << v << '\n';
  }
}

ModelConfig model_config(const RunConfig& cfg, Index source_vocab, Index target_vocab) {
  ModelConfig m;
  m.embed_dim = cfg.get_int("embed_dim");
  m.decoder_hidden = cfg.get_int("hidden");
  m.encoder = parse_encoder_direction(cfg.get("encoder"));
  m.encoder_layers = static_cast<int>(cfg.get_int("enc_layers"));
  m.decoder_layers = static_cast<int>(cfg.get_int("dec_layers"));
  m.context = parse_context_kind(cfg.get("context"));
  m.integration = parse_integration_kind(cfg.get("integration"));
  m.context_hidden = cfg.get_int("context_hidden");
  m.dropout = cfg.get_double("dropout");
  m.source_vocab = source_vocab;
  m.target_vocab = target_vocab;
  m.validate();
  return m;
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.learning_rate = cfg.get_double("lr");
  t.clip_norm = cfg.get_double("clip_norm");
  const auto batch = cfg.get_int("batch_size"), len = cfg.get_int("max_length");
  if (batch < 1 || len < 1) throw ConfigError("batch_size and max_length must be positive");
  t.max_batch = static_cast<std::size_t>(batch);
  t.max_length = static_cast<std::size_t>(len);
  t.dropout = cfg.get_double("dropout");
  t.convergence_delta = cfg.get_double("converge_delta");
  t.max_epochs = static_cast<int>(cfg.get_int("max_epochs"));
  t.seed = cfg.get_seed();
  t.validate();
  return t;
}

std::string model_config_text(const ModelConfig& m) {
  std::ostringstream out;
  out.precision(17);
  out << "embed_dim = " << m.embed_dim << '\n'
      << "hidden = " << m.decoder_hidden << '\n'
      << "encoder = " << to_string(m.encoder) << '\n'
      << "enc_layers = " << m.encoder_layers << '\n'
      << "dec_layers = " << m.decoder_layers << '\n'
      << "context = " << to_string(m.context) << '\n'
      << "integration = " << to_string(m.integration) << '\n'
      << "context_hidden = " << m.context_hidden << '\n'
      << "dropout = " << m.dropout << '\n'
      << "src_vocab = " << m.source_vocab << '\n'
      << "tgt_vocab = " << m.target_vocab << '\n';
  return out.str();
}

ModelConfig parse_model_config_text(const std::string& text) {
  RunConfig cfg;
  Index src = -1, tgt = -1;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("checkpoint config: malformed line '" + line + "'");
    const auto key = trim(std::string_view(line).substr(0, eq));
    const auto value = trim(std::string_view(line).substr(eq + 1));
    if (key == "src_vocab")
      src = std::stoll(value);
    else if (key == "tgt_vocab")
      tgt = std::stoll(value);
    else
      cfg.set(key, value);
  }
  if (src < 0 || tgt < 0) throw ConfigError("checkpoint config: missing vocabulary sizes");
  return model_config(cfg, src, tgt);
}

}  // namespace ctxnmt
