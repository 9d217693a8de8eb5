// SPDX-License-Identifier: Apache-2.0
#include "vulnrisk/taxonomy.hpp"

#include <algorithm>
#include <map>
#include <optional>

#include "vulnrisk/common.hpp"
#include "vulnrisk/embedded_data.hpp"
#include "vulnrisk/error.hpp"
#include "vulnrisk/text.hpp"

namespace vulnrisk::taxonomy {
namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = text.find(sep, pos);
        out.push_back(text.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

// Non-empty, non-comment lines.
std::vector<std::pair<std::size_t, std::string>> content_lines(std::string_view text) {
    std::vector<std::pair<std::size_t, std::string>> out;
    std::size_t number = 0;
    for (auto line : split(text, '\n')) {
        ++number;
        auto clean = normalize_whitespace(line);
        if (clean.empty() || clean.front() == '#') continue;
        out.emplace_back(number, std::move(clean));
    }
    return out;
}

std::optional<Level> parse_level(std::string_view text) {
    if (text == "root") return Level::Root;
    if (text == "category") return Level::Category;
    if (text == "class") return Level::Class;
    if (text == "leaf") return Level::Leaf;
    return std::nullopt;
}

bool contains_phrase(const std::vector<std::string>& words, const std::vector<std::string>& phrase) {
    if (phrase.empty() || phrase.size() > words.size()) return false;
    return std::search(words.begin(), words.end(), phrase.begin(), phrase.end()) != words.end();
}

}  // namespace

std::string_view level_name(Level level) noexcept {
    switch (level) {
        case Level::Root: return "root";
        case Level::Category: return "category";
        case Level::Class: return "class";
        case Level::Leaf: return "leaf";
    }
    return "unknown";
}

Taxonomy Taxonomy::parse(std::string_view text) {
    Taxonomy tree;
    std::map<std::string, std::size_t, std::less<>> index;
    for (const auto& [number, line] : content_lines(text)) {
        const auto fields = split(line, '|');
        const auto where = " (line " + std::to_string(number) + ")";
        if (fields.size() != 4) throw Error(ErrorCode::Schema, "taxonomy line needs 4 '|' fields" + where);
        const auto level = parse_level(fields[2]);
        if (!level) throw Error(ErrorCode::Schema, "unknown taxonomy level '" + std::string(fields[2]) + "'" + where);
        TaxonomyNode node{std::string(fields[0]), std::string(fields[3]), std::string(fields[1]), *level};
        if (node.id.empty() || node.name.empty()) throw Error(ErrorCode::Schema, "taxonomy node lacks id or name" + where);
        if (index.contains(node.id)) throw Error(ErrorCode::Schema, "duplicate taxonomy id '" + node.id + "'" + where);
        if (node.level == Level::Root) {
            if (!node.parent.empty()) throw Error(ErrorCode::Schema, "root must not have a parent" + where);
            if (!tree.nodes_.empty() && tree.nodes_.front().level == Level::Root) {
                throw Error(ErrorCode::Schema, "taxonomy has more than one root" + where);
            }
        } else {
            // Parents must precede children, which also rules out cycles.
            const auto parent = index.find(node.parent);
            if (parent == index.end()) {
                throw Error(ErrorCode::Schema, "parent '" + node.parent + "' of '" + node.id + "' is not defined earlier" + where);
            }
            const auto parent_level = tree.nodes_[parent->second].level;
            if (static_cast<int>(parent_level) + 1 != static_cast<int>(node.level)) {
                throw Error(ErrorCode::Schema, "level of '" + node.id + "' does not follow its parent" + where);
            }
        }
        index.emplace(node.id, tree.nodes_.size());
        tree.nodes_.push_back(std::move(node));
    }
    if (tree.nodes_.empty() || tree.nodes_.front().level != Level::Root) {
        throw Error(ErrorCode::Schema, "taxonomy must start with its root node");
    }
    return tree;
}

const Taxonomy& Taxonomy::builtin() {
    static const Taxonomy tree = parse(data::taxonomy_v1());
    return tree;
}

const TaxonomyNode* Taxonomy::find(std::string_view id) const noexcept {
    const auto it = std::find_if(nodes_.begin(), nodes_.end(), [&](const TaxonomyNode& n) { return n.id == id; });
    return it == nodes_.end() ? nullptr : &*it;
}

const TaxonomyNode* Taxonomy::find_by_name(std::string_view name) const noexcept {
    const auto it = std::find_if(nodes_.begin(), nodes_.end(), [&](const TaxonomyNode& n) { return n.name == name; });
    return it == nodes_.end() ? nullptr : &*it;
}

std::vector<const TaxonomyNode*> Taxonomy::children(std::string_view id) const {
    std::vector<const TaxonomyNode*> out;
    for (const auto& node : nodes_) {
        if (node.parent == id && node.level != Level::Root) out.push_back(&node);
    }
    return out;
}

const TaxonomyNode* Taxonomy::ancestor_at(std::string_view id, Level level) const {
    const TaxonomyNode* node = find(id);
    while (node != nullptr && node->level != level) {
        if (node->level == Level::Root) return nullptr;
        node = find(node->parent);
    }
    return node;
}

Tagger Tagger::parse(std::string_view rules, const Taxonomy& taxonomy) {
    Tagger tagger;
    tagger.taxonomy_ = taxonomy;
    for (const auto& [number, line] : content_lines(rules)) {
        const auto where = " (rules line " + std::to_string(number) + ")";
        const auto arrow = line.find("->");
        if (arrow == std::string::npos) throw Error(ErrorCode::Schema, "rule lacks '->'" + where);
        TagRule rule;
        rule.node_id = normalize_whitespace(std::string_view(line).substr(arrow + 2));
        if (taxonomy.find(rule.node_id) == nullptr) {
            throw Error(ErrorCode::Schema, "rule targets unknown node '" + rule.node_id + "'" + where);
        }
        for (auto keyword : split(std::string_view(line).substr(0, arrow), ',')) {
            auto words = text::tokenize(keyword);
            if (!words.empty()) rule.phrases.push_back(std::move(words));
        }
        if (rule.phrases.empty()) throw Error(ErrorCode::Schema, "rule has no keywords" + where);
        tagger.rules_.push_back(std::move(rule));
    }
    return tagger;
}

const Tagger& Tagger::builtin() {
    static const Tagger tagger = parse(data::taxonomy_rules_v1(), Taxonomy::builtin());
    return tagger;
}

std::vector<TaxonomyNode> Tagger::tag(std::string_view description) const {
    const auto words = text::tokenize(description);
    std::vector<bool> hit(taxonomy_.nodes().size(), false);
    for (const auto& rule : rules_) {
        const bool all = std::all_of(rule.phrases.begin(), rule.phrases.end(),
                                     [&](const auto& phrase) { return contains_phrase(words, phrase); });
        if (!all) continue;
        const auto* node = taxonomy_.find(rule.node_id);
        hit[static_cast<std::size_t>(node - taxonomy_.nodes().data())] = true;
    }
    std::vector<TaxonomyNode> out;
    for (std::size_t i = 0; i < hit.size(); ++i) {
        if (hit[i]) out.push_back(taxonomy_.nodes()[i]);
    }
    return out;
}

}  // namespace vulnrisk::taxonomy
