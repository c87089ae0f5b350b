#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>

#include "gridrag/errors.hpp"
#include "gridrag/util/sha256.hpp"
#include "gridrag/util/strings.hpp"
#include "gridrag/util/xml.hpp"
#include "gridrag/util/zip.hpp"
#include "gridrag/workbook.hpp"

namespace gridrag {

namespace {

using util::XmlNode;

// workbook.xml.rels style map: rId -> target path (resolved relative to a base dir)
std::map<std::string, std::string> load_rels(const util::ZipReader& zip, const std::string& part,
                                             const std::string& base_dir) {
    std::map<std::string, std::string> out;
    if (!zip.has(part)) return out;
    auto root = util::parse_xml(zip.read(part));
    for (const auto* rel : root->children_named("Relationship")) {
        std::string target = rel->attr("Target");
        if (util::starts_with(target, "/")) {
            target = target.substr(1);
        } else {
            // normalize "../" against base_dir
            std::filesystem::path p = std::filesystem::path(base_dir) / target;
            target = p.lexically_normal().generic_string();
        }
        out[rel->attr("Id")] = target;
    }
    return out;
}

std::vector<std::string> load_shared_strings(const util::ZipReader& zip) {
    std::vector<std::string> out;
    if (!zip.has("xl/sharedStrings.xml")) return out;
    auto root = util::parse_xml(zip.read("xl/sharedStrings.xml"));
    for (const auto* si : root->children_named("si")) {
        std::string text;
        si->visit("t", [&](const XmlNode& t) { text += t.text; });
        out.push_back(std::move(text));
    }
    return out;
}

CellValue cell_from_xlsx(const XmlNode& c, const std::vector<std::string>& shared) {
    std::string type = c.attr("t", "n");
    const XmlNode* f = c.child("f");
    const XmlNode* v = c.child("v");
    if (f) {
        // formula kept as text, never evaluated at ingest; cached <v> carried over
        CellValue cell = CellValue::formula("=" + f->text);
        if (v && type != "str" && type != "e" && !v->text.empty()) {
            try {
                cell.numeric = std::stod(v->text);
                cell.raw = v->text;
            } catch (const std::exception&) {
                // non-numeric cache dropped, formula text is authoritative
            }
        }
        return cell;
    }
    if (!v) {
        if (type == "inlineStr") {
            std::string text;
            if (const XmlNode* is = c.child("is")) is->visit("t", [&](const XmlNode& t) { text += t.text; });
            return text.empty() ? CellValue::empty() : CellValue::text(text);
        }
        return CellValue::empty();
    }
    if (type == "s") {
        std::size_t idx = std::stoul(v->text);
        if (idx >= shared.size()) throw MalformedWorkbook("shared string index out of range");
        return CellValue::text(shared[idx]);
    }
    if (type == "str" || type == "inlineStr") return CellValue::text(v->text);
    if (type == "b") return CellValue::boolean(v->text == "1");
    if (type == "e") return CellValue::text(v->text);  // error literal surfaced as text
    double num = std::stod(v->text);
    return CellValue::number(num);
}

std::string media_type_for(const std::string& path) {
    if (util::ends_with(path, ".png")) return "image/png";
    if (util::ends_with(path, ".jpg") || util::ends_with(path, ".jpeg")) return "image/jpeg";
    if (util::ends_with(path, ".gif")) return "image/gif";
    if (util::ends_with(path, ".bmp")) return "image/bmp";
    return "application/octet-stream";
}

void load_images(const util::ZipReader& zip, const std::string& sheet_part, Sheet& sheet,
                 std::vector<std::string>& dropped) {
    std::filesystem::path part_path(sheet_part);
    std::string rels_part =
        (part_path.parent_path() / "_rels" / (part_path.filename().string() + ".rels"))
            .generic_string();
    auto sheet_rels = load_rels(zip, rels_part, part_path.parent_path().generic_string());

    auto sheet_root = util::parse_xml(zip.read(sheet_part));
    const XmlNode* drawing = sheet_root->child("drawing");
    if (!drawing) return;
    auto it = sheet_rels.find(drawing->attr("id"));
    if (it == sheet_rels.end() || !zip.has(it->second)) return;
    std::string drawing_part = it->second;

    std::filesystem::path dpath(drawing_part);
    std::string drels_part =
        (dpath.parent_path() / "_rels" / (dpath.filename().string() + ".rels")).generic_string();
    auto drawing_rels = load_rels(zip, drels_part, dpath.parent_path().generic_string());

    auto droot = util::parse_xml(zip.read(drawing_part));
    int counter = 0;
    for (const auto& anchor : droot->children) {
        const XmlNode* from = anchor->child("from");
        const XmlNode* pic = anchor->child("pic");
        if (!pic) continue;
        int row = 1, col = 1;
        if (from) {
            if (const XmlNode* r = from->child("row")) row = std::stoi(r->text) + 1;
            if (const XmlNode* c = from->child("col")) col = std::stoi(c->text) + 1;
        }
        std::string alt;
        const XmlNode* blip = nullptr;
        pic->visit("cNvPr", [&](const XmlNode& n) { if (alt.empty()) alt = n.attr("descr"); });
        pic->visit("blip", [&](const XmlNode& n) { if (!blip) blip = &n; });
        if (!blip) continue;
        auto mit = drawing_rels.find(blip->attr("embed"));
        if (mit == drawing_rels.end() || !zip.has(mit->second)) {
            dropped.push_back("image with unresolved media relationship in " + sheet.name);
            continue;
        }
        std::string bytes = zip.read(mit->second);
        if (bytes.empty()) {
            dropped.push_back("empty image payload in " + sheet.name);
            continue;
        }
        EmbeddedImage img;
        img.image_id = sheet.name + "-img" + std::to_string(++counter);
        img.sheet = sheet.name;
        img.row = row;
        img.col = col;
        img.payload.assign(bytes.begin(), bytes.end());
        img.encoding = media_type_for(mit->second);
        img.alt_text = alt;
        sheet.images.push_back(std::move(img));
    }
}

}  // namespace

XlsxIngest ingest_xlsx(const std::string& path) {
    if (!std::filesystem::exists(path)) throw FileNotFound(path);
    if (!util::ends_with(path, ".xlsx")) throw UnsupportedFormat(path + " (expected .xlsx)");
    util::ZipReader zip(path);
    if (!zip.has("xl/workbook.xml"))
        throw UnsupportedFormat(path + " is not an OOXML spreadsheet");

    XlsxIngest result;
    Workbook& wb = result.workbook;
    std::string content = util::read_file(path);
    wb.workbook_id =
        std::filesystem::path(path).stem().string() + "-" + util::Sha256::hex_of(content).substr(0, 12);

    auto wb_rels = load_rels(zip, "xl/_rels/workbook.xml.rels", "xl");
    auto shared = load_shared_strings(zip);

    // unsupported-feature census
    for (const auto& name : zip.names()) {
        if (name.find("vbaProject") != std::string::npos)
            result.dropped.push_back("macro module: " + name);
        else if (name.find("pivotCache") != std::string::npos)
            result.dropped.push_back("pivot cache: " + name);
        else if (name.find("charts/chart") != std::string::npos)
            result.dropped.push_back("chart object: " + name);
    }

    auto wb_root = util::parse_xml(zip.read("xl/workbook.xml"));
    const XmlNode* sheets_node = wb_root->child("sheets");
    if (!sheets_node) throw MalformedWorkbook("workbook.xml has no sheets element");
    for (const auto* sh : sheets_node->children_named("sheet")) {
        Sheet sheet;
        sheet.name = sh->attr("name");
        auto rit = wb_rels.find(sh->attr("id"));
        std::string part = rit != wb_rels.end() ? rit->second
                                                : "xl/worksheets/sheet" + sh->attr("sheetId") + ".xml";
        if (!zip.has(part)) throw MalformedWorkbook("missing worksheet part " + part);
        auto root = util::parse_xml(zip.read(part));
        const XmlNode* sheet_data = root->child("sheetData");
        if (sheet_data) {
            for (const auto* row_node : sheet_data->children_named("row")) {
                for (const auto* c : row_node->children_named("c")) {
                    std::string ref = c->attr("r");
                    if (ref.empty()) continue;
                    auto [row, col] = parse_a1(ref);
                    CellValue v = cell_from_xlsx(*c, shared);
                    if (!v.is_empty()) sheet.cells[{row, col}] = std::move(v);
                }
            }
        }
        load_images(zip, part, sheet, result.dropped);
        for (const auto& [rc, v] : sheet.cells) {
            sheet.n_rows = std::max(sheet.n_rows, rc.first);
            sheet.n_cols = std::max(sheet.n_cols, rc.second);
        }
        for (const auto& img : sheet.images) {
            sheet.n_rows = std::max(sheet.n_rows, img.row);
            sheet.n_cols = std::max(sheet.n_cols, img.col);
        }
        wb.sheets.push_back(std::move(sheet));
    }
    validate_workbook(wb);
    return result;
}

namespace {

std::string worksheet_xml(const Sheet& sheet) {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n"
        << "<worksheet xmlns=\"http://schemas.openxmlformats.org/spreadsheetml/2006/main\" "
           "xmlns:r=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships\">"
        << "<sheetData>";
    int current_row = -1;
    bool row_open = false;
    for (const auto& [rc, v] : sheet.cells) {
        auto [row, col] = rc;
        if (row != current_row) {
            if (row_open) out << "</row>";
            out << "<row r=\"" << row << "\">";
            current_row = row;
            row_open = true;
        }
        std::string ref = a1_ref(row, col);
        switch (v.kind) {
            case CellKind::number:
                out << "<c r=\"" << ref << "\"><v>";
                {
                    std::ostringstream num;
                    num.precision(17);
                    num << *v.numeric;
                    out << num.str();
                }
                out << "</v></c>";
                break;
            case CellKind::boolean:
                out << "<c r=\"" << ref << "\" t=\"b\"><v>" << (*v.numeric != 0.0 ? 1 : 0)
                    << "</v></c>";
                break;
            case CellKind::formula:
                out << "<c r=\"" << ref << "\"><f>" << util::xml_escape(v.formula_text->substr(1))
                    << "</f>";
                if (v.numeric) {
                    out << "<v>";
                    std::ostringstream num;
                    num.precision(17);
                    num << *v.numeric;
                    out << num.str() << "</v>";
                }
                out << "</c>";
                break;
            default:
                out << "<c r=\"" << ref << "\" t=\"inlineStr\"><is><t xml:space=\"preserve\">"
                    << util::xml_escape(v.raw) << "</t></is></c>";
        }
    }
    if (row_open) out << "</row>";
    out << "</sheetData>";
    if (!sheet.images.empty()) out << "<drawing r:id=\"rIdD1\"/>";
    out << "</worksheet>\n";
    return out.str();
}

std::string media_ext_for(const std::string& encoding) {
    if (encoding == "image/jpeg") return "jpeg";
    if (encoding == "image/gif") return "gif";
    if (encoding == "image/bmp") return "bmp";
    return "png";
}

std::string drawing_xml(const Sheet& sheet) {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n"
        << "<xdr:wsDr "
           "xmlns:xdr=\"http://schemas.openxmlformats.org/drawingml/2006/spreadsheetDrawing\" "
           "xmlns:a=\"http://schemas.openxmlformats.org/drawingml/2006/main\" "
           "xmlns:r=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships\">";
    for (std::size_t i = 0; i < sheet.images.size(); ++i) {
        const auto& img = sheet.images[i];
        out << "<xdr:oneCellAnchor><xdr:from><xdr:col>" << (img.col - 1)
            << "</xdr:col><xdr:colOff>0</xdr:colOff><xdr:row>" << (img.row - 1)
            << "</xdr:row><xdr:rowOff>0</xdr:rowOff></xdr:from>"
            << "<xdr:ext cx=\"914400\" cy=\"914400\"/>"
            << "<xdr:pic><xdr:nvPicPr><xdr:cNvPr id=\"" << (i + 1) << "\" name=\""
            << util::xml_escape(img.image_id) << "\" descr=\"" << util::xml_escape(img.alt_text)
            << "\"/><xdr:cNvPicPr/></xdr:nvPicPr>"
            << "<xdr:blipFill><a:blip r:embed=\"rId" << (i + 1)
            << "\"/></xdr:blipFill><xdr:spPr/></xdr:pic></xdr:oneCellAnchor>";
    }
    out << "</xdr:wsDr>\n";
    return out.str();
}

}  // namespace

void write_xlsx(const Workbook& wb, const std::string& path) {
    util::ZipWriter zip;
    zip.add("[Content_Types].xml",
            "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n"
            "<Types xmlns=\"http://schemas.openxmlformats.org/package/2006/content-types\">"
            "<Default Extension=\"rels\" "
            "ContentType=\"application/vnd.openxmlformats-package.relationships+xml\"/>"
            "<Default Extension=\"xml\" ContentType=\"application/xml\"/>"
            "<Override PartName=\"/xl/workbook.xml\" "
            "ContentType=\"application/"
            "vnd.openxmlformats-officedocument.spreadsheetml.sheet.main+xml\"/>" +
                [&] {
                    std::string parts;
                    bool any_images = false;
                    for (std::size_t i = 0; i < wb.sheets.size(); ++i) {
                        parts += "<Override PartName=\"/xl/worksheets/sheet" +
                                 std::to_string(i + 1) +
                                 ".xml\" ContentType=\"application/"
                                 "vnd.openxmlformats-officedocument.spreadsheetml.worksheet+xml\"/>";
                        if (!wb.sheets[i].images.empty()) {
                            any_images = true;
                            parts += "<Override PartName=\"/xl/drawings/drawing" +
                                     std::to_string(i + 1) +
                                     ".xml\" ContentType=\"application/"
                                     "vnd.openxmlformats-officedocument.drawing+xml\"/>";
                        }
                    }
                    if (any_images)
                        parts = "<Default Extension=\"png\" ContentType=\"image/png\"/>"
                                "<Default Extension=\"jpeg\" ContentType=\"image/jpeg\"/>"
                                "<Default Extension=\"gif\" ContentType=\"image/gif\"/>"
                                "<Default Extension=\"bmp\" ContentType=\"image/bmp\"/>" +
                                parts;
                    return parts;
                }() +
                "</Types>\n");
    zip.add("_rels/.rels",
            "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n"
            "<Relationships xmlns=\"http://schemas.openxmlformats.org/package/2006/"
            "relationships\"><Relationship Id=\"rId1\" "
            "Type=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships/"
            "officeDocument\" Target=\"xl/workbook.xml\"/></Relationships>\n");

    std::ostringstream wb_xml, rels_xml;
    wb_xml << "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n"
           << "<workbook xmlns=\"http://schemas.openxmlformats.org/spreadsheetml/2006/main\" "
              "xmlns:r=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships\">"
           << "<sheets>";
    rels_xml << "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n"
             << "<Relationships "
                "xmlns=\"http://schemas.openxmlformats.org/package/2006/relationships\">";
    for (std::size_t i = 0; i < wb.sheets.size(); ++i) {
        wb_xml << "<sheet name=\"" << util::xml_escape(wb.sheets[i].name) << "\" sheetId=\""
               << (i + 1) << "\" r:id=\"rId" << (i + 1) << "\"/>";
        rels_xml << "<Relationship Id=\"rId" << (i + 1)
                 << "\" Type=\"http://schemas.openxmlformats.org/officeDocument/2006/"
                    "relationships/worksheet\" Target=\"worksheets/sheet"
                 << (i + 1) << ".xml\"/>";
    }
    wb_xml << "</sheets></workbook>\n";
    rels_xml << "</Relationships>\n";
    zip.add("xl/workbook.xml", wb_xml.str());
    zip.add("xl/_rels/workbook.xml.rels", rels_xml.str());
    for (std::size_t i = 0; i < wb.sheets.size(); ++i) {
        const Sheet& sheet = wb.sheets[i];
        std::string n = std::to_string(i + 1);
        zip.add("xl/worksheets/sheet" + n + ".xml", worksheet_xml(sheet));
        if (sheet.images.empty()) continue;
        zip.add("xl/worksheets/_rels/sheet" + n + ".xml.rels",
                "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n"
                "<Relationships "
                "xmlns=\"http://schemas.openxmlformats.org/package/2006/relationships\">"
                "<Relationship Id=\"rIdD1\" "
                "Type=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships/"
                "drawing\" Target=\"../drawings/drawing" + n + ".xml\"/></Relationships>\n");
        zip.add("xl/drawings/drawing" + n + ".xml", drawing_xml(sheet));
        std::ostringstream drels;
        drels << "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n"
              << "<Relationships "
                 "xmlns=\"http://schemas.openxmlformats.org/package/2006/relationships\">";
        for (std::size_t k = 0; k < sheet.images.size(); ++k) {
            std::string media = "image" + n + "_" + std::to_string(k + 1) + "." +
                                media_ext_for(sheet.images[k].encoding);
            drels << "<Relationship Id=\"rId" << (k + 1)
                  << "\" Type=\"http://schemas.openxmlformats.org/officeDocument/2006/"
                     "relationships/image\" Target=\"../media/" << media << "\"/>";
            zip.add("xl/media/" + media,
                    std::string(sheet.images[k].payload.begin(), sheet.images[k].payload.end()));
        }
        drels << "</Relationships>\n";
        zip.add("xl/drawings/_rels/drawing" + n + ".xml.rels", drels.str());
    }
    zip.write_to(path);
}

}  // namespace gridrag
