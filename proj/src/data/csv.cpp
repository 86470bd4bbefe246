#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "moce/data.hpp"
#include "moce/errors.hpp"

namespace moce::data {

namespace {

constexpr const char* kConceptPrefix = "concept:";

// RFC-4180 records; accepts LF or CRLF line ends and a trailing newline.
std::vector<std::vector<std::string>> parse_csv(const std::string& text, const std::string& source) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
    };

    std::size_t i = 0;
    if (text.compare(0, 3, "\xEF\xBB\xBF") == 0) i = 3;  // UTF-8 BOM
    for (; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field_started) {
                    throw ParseError(source + ": line " + std::to_string(line) + ": quote inside unquoted field");
                }
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                end_field();
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') break;
                field += c;
                field_started = true;
                break;
            case '\n':
                end_row();
                ++line;
                break;
            default:
                field += c;
                field_started = true;
        }
    }
    if (in_quotes) throw ParseError(source + ": unterminated quoted field");
    if (field_started || !row.empty()) end_row();
    return rows;
}

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string format_real(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<Example> parse_examples(const std::string& csv_text, const ConceptSchema& schema,
                                    std::size_t first_id, const std::string& source) {
    schema.validate();
    const auto rows = parse_csv(csv_text, source);
    if (rows.empty()) throw SchemaError(source + ": missing header row");

    const auto& header = rows.front();
    std::optional<std::size_t> text_col, label_col;
    std::vector<std::optional<std::size_t>> concept_cols(schema.num_concepts());
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string name = trim(header[c]);
        if (name == "text") {
            text_col = c;
        } else if (name == "label") {
            label_col = c;
        } else if (name.rfind(kConceptPrefix, 0) == 0) {
            const std::string concept_name = name.substr(std::string(kConceptPrefix).size());
            bool known = false;
            for (std::size_t k = 0; k < schema.num_concepts(); ++k) {
                if (schema.concepts[k].name == concept_name) {
                    concept_cols[k] = c;
                    known = true;
                }
            }
            if (!known) throw SchemaError(source + ": column '" + name + "' names no schema concept");
        } else {
            throw SchemaError(source + ": unexpected column '" + name + "'");
        }
    }
    if (!text_col) throw SchemaError(source + ": missing column 'text'");
    std::size_t present = 0;
    for (const auto& col : concept_cols) present += col.has_value();
    if (present != 0 && present != concept_cols.size()) {
        for (std::size_t k = 0; k < concept_cols.size(); ++k) {
            if (!concept_cols[k]) {
                throw SchemaError(source + ": missing column 'concept:" + schema.concepts[k].name + "'");
            }
        }
    }
    const bool has_concepts = present != 0;

    std::vector<Example> out;
    out.reserve(rows.size() - 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::string where = source + ": row " + std::to_string(r);
        if (row.size() == 1 && row[0].empty()) continue;  // blank line
        if (row.size() != header.size()) {
            throw ParseError(where + ": expected " + std::to_string(header.size()) + " fields, found " +
                             std::to_string(row.size()));
        }
        Example ex;
        ex.id = first_id + out.size();
        ex.text = row[*text_col];
        if (has_concepts) {
            std::vector<std::size_t> values(schema.num_concepts());
            for (std::size_t k = 0; k < values.size(); ++k) {
                const std::string& cell = row[*concept_cols[k]];
                const auto idx = schema.value_index(k, trim(cell));
                if (!idx) {
                    throw ParseError(where + ", column 'concept:" + schema.concepts[k].name +
                                     "': unknown value '" + cell + "'");
                }
                values[k] = *idx;
            }
            ex.concepts = std::move(values);
        }
        if (label_col) {
            const std::string cell = trim(row[*label_col]);
            if (!cell.empty()) {
                if (schema.task.kind == model::TaskKind::Classification) {
                    const auto& classes = schema.task.classes;
                    const auto it = std::find(classes.begin(), classes.end(), cell);
                    if (it == classes.end()) {
                        throw ParseError(where + ", column 'label': unknown class '" + cell + "'");
                    }
                    ex.label = static_cast<double>(it - classes.begin());
                } else {
                    double v = 0.0;
                    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
                    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
                        throw ParseError(where + ", column 'label': not a number '" + cell + "'");
                    }
                    ex.label = v;
                }
            }
        }
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<Example> read_examples(const std::string& path, const ConceptSchema& schema, std::size_t first_id) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open data file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_examples(ss.str(), schema, first_id, path);
}

std::string format_examples(const std::vector<Example>& examples, const ConceptSchema& schema) {
    bool has_concepts = false;
    bool has_label = false;
    for (const auto& ex : examples) {
        has_concepts = has_concepts || ex.concepts.has_value();
        has_label = has_label || ex.label.has_value();
    }
    std::string out = "text";
    if (has_concepts) {
        for (const auto& c : schema.concepts) out += "," + quote(kConceptPrefix + c.name);
    }
    if (has_label) out += ",label";
    out += '\n';
    for (const auto& ex : examples) {
        out += quote(ex.text);
        if (has_concepts) {
            if (!ex.concepts) throw ContractError("format_examples: mixed labeled and unlabeled concepts");
            for (std::size_t k = 0; k < schema.num_concepts(); ++k) {
                out += ',' + quote(schema.concepts[k].values.at((*ex.concepts)[k]));
            }
        }
        if (has_label) {
            out += ',';
            if (ex.label) {
                if (schema.task.kind == model::TaskKind::Classification) {
                    out += quote(schema.task.classes.at(static_cast<std::size_t>(*ex.label)));
                } else {
                    out += format_real(*ex.label);
                }
            }
        }
        out += '\n';
    }
    return out;
}

void write_examples(const std::string& path, const std::vector<Example>& examples, const ConceptSchema& schema) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write data file " + path);
    out << format_examples(examples, schema);
}

DatasetSplit load_dataset(const std::string& dir, const ConceptSchema& schema) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw InputError("data directory not found: " + dir);
    DatasetSplit split;
    split.schema = schema;
    split.provenance = fs::absolute(dir).string();
    split.train = read_examples((fs::path(dir) / "train.csv").string(), schema, 0);
    split.dev = read_examples((fs::path(dir) / "dev.csv").string(), schema, split.train.size());
    split.test = read_examples((fs::path(dir) / "test.csv").string(), schema, split.train.size() + split.dev.size());
    split.validate();
    return split;
}

void save_dataset(const std::string& dir, const DatasetSplit& split) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    write_examples((fs::path(dir) / "train.csv").string(), split.train, split.schema);
    write_examples((fs::path(dir) / "dev.csv").string(), split.dev, split.schema);
    write_examples((fs::path(dir) / "test.csv").string(), split.test, split.schema);
    split.schema.save((fs::path(dir) / "schema.json").string());
}

}  // namespace moce::data
