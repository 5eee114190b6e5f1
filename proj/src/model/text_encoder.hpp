#ifndef VDIFF_MODEL_TEXT_ENCODER_HPP
#define VDIFF_MODEL_TEXT_ENCODER_HPP

#include <sstream>

#include "core/params.hpp"
#include "model/positional.hpp"

namespace vd {

constexpr int kTextLen = 8;
constexpr int kTextDim = 64;

struct Vocabulary {
    std::vector<std::string> words;  // index 0 = <pad>, 1 = <unk>
    std::unordered_map<std::string, int64_t> index;

    int64_t pad_id() const { return 0; }
    int64_t unk_id() const { return 1; }
    int64_t size() const { return (int64_t)words.size(); }

    int64_t lookup(const std::string& w) const {
        auto it = index.find(w);
        return it == index.end() ? unk_id() : it->second;
    }
};

// Closed caption grammar: every word the synthetic datasets can emit.
inline Vocabulary build_default_vocab() {
    Vocabulary v;
    auto add = [&](const std::string& w) {
        if (!v.index.count(w)) {
            v.index[w] = (int64_t)v.words.size();
            v.words.push_back(w);
        }
    };
    add("<pad>");
    add("<unk>");
    for (const char* w : {"red", "green", "blue", "yellow", "magenta", "cyan"}) add(w);
    for (const char* w : {"circle", "square", "triangle"}) add(w);
    for (const char* w : {"moving", "left", "right", "up", "down", "growing", "shrinking",
                          "holding", "still"})
        add(w);
    for (const char* w : {"on", "background", "style"}) add(w);
    for (const char* w : {"black", "white", "gray", "tan"}) add(w);
    for (const char* w : {"sks-outline", "sks-pastel", "sks-inverted"}) add(w);
    return v;
}

// lowercase whitespace tokenizer, padded/truncated to kTextLen
inline std::vector<int64_t> tokenize(const Vocabulary& vocab, const std::string& prompt) {
    std::vector<int64_t> toks;
    std::istringstream is(prompt);
    std::string w;
    while (is >> w && (int)toks.size() < kTextLen) {
        for (auto& ch : w) ch = (char)std::tolower((unsigned char)ch);
        toks.push_back(vocab.lookup(w));
    }
    while ((int)toks.size() < kTextLen) toks.push_back(vocab.pad_id());
    return toks;
}

struct TextEmbedding {
    std::vector<int64_t> tokens;  // length kTextLen
    Tensor vectors;               // (kTextLen, kTextDim)
};

inline void add_text_params(ParamDict& p, const Vocabulary& vocab, Rng& rng) {
    p.add("text.tok_embed", Tensor::randn({vocab.size(), kTextDim}, rng, 0.02f));
}

// token lookup + sinusoidal token-position offsets; batch of prompts -> (B, L, D)
template <typename T>
VarT<T>* text_embed(GraphT<T>& g, ParamVarsT<T>& pv, const std::vector<int64_t>& flat_tokens) {
    VD_CHECK_CONTRACT(flat_tokens.size() % kTextLen == 0, "text_embed: token count not multiple of L");
    int64_t B = (int64_t)flat_tokens.size() / kTextLen;
    VarT<T>* e = g.rows_gather(pv["text.tok_embed"], flat_tokens);  // (B*L, D)
    e = g.reshape(e, {B, (int64_t)kTextLen, (int64_t)kTextDim});
    VarT<T>* pe = g.constant(sinusoidal_encoding<T>(kTextLen, kTextDim));
    return g.add_rows(e, pe);
}

// deterministic total function over arbitrary prompts
inline TextEmbedding encode_text(const ParamDict& params, const Vocabulary& vocab,
                                 const std::string& prompt) {
    TextEmbedding out;
    out.tokens = tokenize(vocab, prompt);
    Graph g;
    ParamVars pv(g, const_cast<ParamDict&>(params));
    auto* e = text_embed(g, pv, out.tokens);
    out.vectors = e->value.view({kTextLen, kTextDim}).clone();
    return out;
}

}  // namespace vd

#endif
