#include "uqgan/checkpoint.hpp"

#include "uqgan/errors.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>
#include <set>

namespace uqgan::checkpoint {

using nlohmann::json;

namespace {
constexpr char kMagic[8] = {'U', 'Q', 'C', 'K', '1', '\n', 0, 0};

json arch_to_json(const models::ArchitectureSpec& a) {
    return json{{"kind", models::to_string(a.kind)},
                {"input_shape", a.input_shape},
                {"n_classes", a.n_classes},
                {"latent_dim", a.latent_dim},
                {"noise_dim", a.noise_dim},
                {"dropout_rate", a.dropout_rate},
                {"gen_hidden", a.gen_hidden},
                {"critic_hidden", a.critic_hidden}};
}

models::ArchitectureSpec arch_from_json(const json& j) {
    models::ArchitectureSpec a;
    a.kind = models::arch_kind_from_string(j.at("kind").get<std::string>());
    a.input_shape = j.at("input_shape").get<std::vector<int>>();
    a.n_classes = j.at("n_classes").get<int>();
    a.latent_dim = j.at("latent_dim").get<int>();
    a.noise_dim = j.at("noise_dim").get<int>();
    a.dropout_rate = j.at("dropout_rate").get<double>();
    a.gen_hidden = j.at("gen_hidden").get<std::vector<int>>();
    a.critic_hidden = j.at("critic_hidden").get<std::vector<int>>();
    return a;
}

json config_to_json(const trainer::TrainingConfig& c) {
    return json{{"lambda_gp", c.h.lambda_gp},
                {"lambda_cl", c.h.lambda_cl},
                {"lambda_real", c.h.lambda_real},
                {"lambda_r", c.h.lambda_r},
                {"batch_size", c.batch_size},
                {"generator_iters", c.generator_iters},
                {"inner_steps", c.inner_steps},
                {"lr_classifier", c.lr_classifier},
                {"lr_gan", c.lr_gan},
                {"lr_floor", c.lr_floor},
                {"cae_epochs", c.cae_epochs},
                {"seed", c.seed},
                {"val_fraction", c.val_fraction},
                {"eval_interval", c.eval_interval},
                {"use_gan", c.use_gan}};
}

trainer::TrainingConfig config_from_json(const json& j) {
    trainer::TrainingConfig c;
    c.h.lambda_gp = j.at("lambda_gp").get<double>();
    c.h.lambda_cl = j.at("lambda_cl").get<double>();
    c.h.lambda_real = j.at("lambda_real").get<double>();
    c.h.lambda_r = j.at("lambda_r").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.generator_iters = j.at("generator_iters").get<int>();
    c.inner_steps = j.at("inner_steps").get<int>();
    c.lr_classifier = j.at("lr_classifier").get<double>();
    c.lr_gan = j.at("lr_gan").get<double>();
    c.lr_floor = j.at("lr_floor").get<double>();
    c.cae_epochs = j.at("cae_epochs").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.val_fraction = j.at("val_fraction").get<double>();
    c.eval_interval = j.at("eval_interval").get<int>();
    c.use_gan = j.at("use_gan").get<bool>();
    return c;
}
}  // namespace

TensorList snapshot(const nn::ParamRegistry& reg,
                    const std::vector<std::pair<std::string, Mat*>>& buffers) {
    TensorList out;
    out.reserve(reg.items().size() + buffers.size());
    for (const auto& [name, var] : reg.items()) out.emplace_back(name, var.val());
    for (const auto& [name, mat] : buffers) out.emplace_back(name, *mat);
    return out;
}

void restore(nn::ParamRegistry& reg,
             const std::vector<std::pair<std::string, Mat*>>& buffers,
             const TensorList& saved) {
    std::set<std::string> used;
    auto take = [&](const std::string& name, Eigen::Index rows,
                    Eigen::Index cols) -> const Mat& {
        for (const auto& [n, m] : saved) {
            if (n != name) continue;
            if (m.rows() != rows || m.cols() != cols)
                throw IoError("checkpoint tensor '" + name + "' has wrong shape");
            if (!used.insert(name).second)
                throw IoError("checkpoint tensor '" + name + "' restored twice");
            return m;
        }
        throw IoError("checkpoint is missing tensor '" + name + "'");
    };
    for (const auto& [name, var] : reg.items()) {
        const Mat& m = take(name, var.rows(), var.cols());
        ad::Var handle = var;  // shared node: updating the copy updates the model
        handle.update_value(m);
    }
    for (auto& [name, mat] : buffers) *mat = take(name, mat->rows(), mat->cols());
    if (used.size() != saved.size())
        throw IoError("checkpoint contains tensors unknown to this model");
}

void save(const std::string& path, const Checkpoint& c) {
    json header;
    header["arch"] = arch_to_json(c.arch);
    header["config"] = config_to_json(c.config);
    header["seed"] = c.seed;
    json groups = json::array();
    for (const auto& [gname, tensors] : c.groups) {
        json tlist = json::array();
        for (const auto& [tname, m] : tensors)
            tlist.push_back({{"name", tname}, {"rows", m.rows()}, {"cols", m.cols()}});
        groups.push_back({{"name", gname}, {"tensors", tlist}});
    }
    header["groups"] = groups;
    const std::string hs = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(kMagic, 8);
    const std::uint64_t hlen = hs.size();
    f.write(reinterpret_cast<const char*>(&hlen), 8);
    f.write(hs.data(), std::streamsize(hs.size()));
    for (const auto& [gname, tensors] : c.groups)
        for (const auto& [tname, m] : tensors)
            f.write(reinterpret_cast<const char*>(m.data()),
                    std::streamsize(sizeof(double)) * m.size());
    if (!f) throw IoError("write failed: " + path);
}

Checkpoint load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    char magic[8];
    if (!f.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        throw IoError("not a UQGAN checkpoint: " + path);
    std::uint64_t hlen = 0;
    if (!f.read(reinterpret_cast<char*>(&hlen), 8) || hlen == 0 || hlen > (1u << 26))
        throw IoError("bad checkpoint header: " + path);
    std::string hs(hlen, '\0');
    if (!f.read(hs.data(), std::streamsize(hlen)))
        throw IoError("truncated checkpoint header: " + path);
    json header;
    try {
        header = json::parse(hs);
    } catch (const json::exception& e) {
        throw IoError("unparsable checkpoint header: " + std::string(e.what()));
    }

    Checkpoint c;
    try {
        c.arch = arch_from_json(header.at("arch"));
        c.config = config_from_json(header.at("config"));
        c.seed = header.at("seed").get<std::uint64_t>();
        for (const auto& g : header.at("groups")) {
            TensorList tensors;
            for (const auto& t : g.at("tensors")) {
                Mat m(t.at("rows").get<Eigen::Index>(), t.at("cols").get<Eigen::Index>());
                if (!f.read(reinterpret_cast<char*>(m.data()),
                            std::streamsize(sizeof(double)) * m.size()))
                    throw IoError("truncated checkpoint tensor data: " + path);
                tensors.emplace_back(t.at("name").get<std::string>(), std::move(m));
            }
            c.groups[g.at("name").get<std::string>()] = std::move(tensors);
        }
    } catch (const json::exception& e) {
        throw IoError("malformed checkpoint header: " + std::string(e.what()));
    }
    return c;
}

}  // namespace uqgan::checkpoint
