#include "hara/templates.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hara/error.hpp"

namespace hara {
namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TemplateError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool is_placeholder_char(char c) {
    return std::islower(static_cast<unsigned char>(c)) ||
           std::isdigit(static_cast<unsigned char>(c)) || c == '_';
}

// Splits a stage file on "## Context" / "## Task" / "## Template" headers.
void split_sections(const std::string& text, PromptTemplate& out,
                    const std::string& where) {
    std::istringstream in(text);
    std::string line;
    std::string* current = nullptr;
    bool saw_any = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line == "## Context") { current = &out.context_section; saw_any = true; continue; }
        if (line == "## Task") { current = &out.task_section; saw_any = true; continue; }
        if (line == "## Template") { current = &out.template_section; saw_any = true; continue; }
        if (current) {
            if (!current->empty()) *current += '\n';
            *current += line;
        }
    }
    if (!saw_any)
        throw TemplateError(where + ": no '## Context/Task/Template' sections");
    auto trim = [](std::string& s) {
        while (!s.empty() && (s.back() == '\n' || s.back() == ' ')) s.pop_back();
        size_t b = 0;
        while (b < s.size() && s[b] == '\n') ++b;
        s.erase(0, b);
    };
    trim(out.context_section);
    trim(out.task_section);
    trim(out.template_section);
}

}  // namespace

std::set<std::string> find_placeholders(std::string_view text) {
    std::set<std::string> out;
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '{') {
            if (i + 1 < text.size() && text[i + 1] == '{') { ++i; continue; }
            size_t j = i + 1;
            while (j < text.size() && is_placeholder_char(text[j])) ++j;
            if (j == i + 1 || j >= text.size() || text[j] != '}')
                throw TemplateError("ill-formed placeholder near offset " +
                                    std::to_string(i));
            out.emplace(text.substr(i + 1, j - i - 1));
            i = j;
        } else if (c == '}') {
            if (i + 1 < text.size() && text[i + 1] == '}') { ++i; continue; }
            throw TemplateError("stray '}' at offset " + std::to_string(i));
        }
    }
    return out;
}

TemplateSet TemplateSet::load(const std::filesystem::path& bundle_dir) {
    auto manifest_path = bundle_dir / "manifest.json";
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw TemplateError("bad manifest " + manifest_path.string() + ": " +
                            e.what());
    }

    TemplateSet set;
    set.version_ = manifest.value("version", "");
    if (set.version_.empty())
        throw TemplateError("manifest has no bundle version");

    if (!manifest.contains("stages") || !manifest["stages"].is_object())
        throw TemplateError("manifest has no 'stages' table");

    for (const auto& [name, entry] : manifest["stages"].items()) {
        auto stage = parse_stage(name);
        if (!stage) throw TemplateError("manifest names unknown stage: " + name);
        if (set.templates_.contains(*stage))
            throw TemplateError("duplicate stage: " + name);

        PromptTemplate tmpl;
        tmpl.stage = *stage;
        std::string file = entry.value("file", "");
        if (file.empty())
            throw TemplateError("stage " + name + " has no file in manifest");
        split_sections(read_file(bundle_dir / file), tmpl, name);
        if (tmpl.template_section.empty())
            throw TemplateError(name + ": template section is empty");

        for (const auto& p : entry.value("placeholders", nlohmann::json::array()))
            tmpl.declared_placeholders.insert(p.get<std::string>());

        auto found = find_placeholders(tmpl.context_section);
        for (const auto& p : find_placeholders(tmpl.task_section)) found.insert(p);
        for (const auto& p : find_placeholders(tmpl.template_section)) found.insert(p);
        for (const auto& p : found)
            if (!tmpl.declared_placeholders.contains(p))
                throw TemplateError(name + ": placeholder {" + p +
                                    "} used but not declared");
        for (const auto& p : tmpl.declared_placeholders)
            if (!found.contains(p))
                throw TemplateError(name + ": placeholder {" + p +
                                    "} declared but never used");

        set.templates_.emplace(*stage, std::move(tmpl));
    }

    for (Stage s : kAllStages)
        if (!set.templates_.contains(s))
            throw TemplateError("missing stage: " + to_string(s));
    return set;
}

const PromptTemplate& TemplateSet::at(Stage stage) const {
    auto it = templates_.find(stage);
    if (it == templates_.end())
        throw TemplateError("no template for stage " + to_string(stage));
    return it->second;
}

namespace {

std::string substitute(std::string_view text,
                       const std::map<std::string, std::string>& bindings) {
    std::string out;
    out.reserve(text.size());
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '{' && i + 1 < text.size() && text[i + 1] == '{') {
            out += '{';
            ++i;
        } else if (c == '}' && i + 1 < text.size() && text[i + 1] == '}') {
            out += '}';
            ++i;
        } else if (c == '{') {
            size_t j = i + 1;
            while (j < text.size() && is_placeholder_char(text[j])) ++j;
            std::string name(text.substr(i + 1, j - i - 1));
            out += bindings.at(name);
            i = j;
        } else {
            out += c;
        }
    }
    return out;
}

}  // namespace

RenderedPrompt render(const PromptTemplate& tmpl,
                      const std::map<std::string, std::string>& bindings) {
    for (const auto& name : tmpl.declared_placeholders) {
        auto it = bindings.find(name);
        if (it == bindings.end())
            throw TemplateError(to_string(tmpl.stage) + ": missing binding {" +
                                name + "}");
        if (it->second.empty())
            throw TemplateError(to_string(tmpl.stage) + ": empty binding {" +
                                name + "}");
    }
    for (const auto& [name, _] : bindings)
        if (!tmpl.declared_placeholders.contains(name))
            throw TemplateError(to_string(tmpl.stage) + ": extra binding {" +
                                name + "}");

    RenderedPrompt out;
    out.stage = tmpl.stage;
    out.bindings = bindings;
    out.text = substitute(tmpl.context_section, bindings) + "\n\n" +
               substitute(tmpl.task_section, bindings) + "\n\n" +
               substitute(tmpl.template_section, bindings);
    out.token_estimate = estimate_tokens(out.text);
    return out;
}

int estimate_tokens(std::string_view text) {
    return static_cast<int>((text.size() + 3) / 4);
}

}  // namespace hara
