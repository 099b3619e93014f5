/* Reference canonicalizer driving libxml2's C14N implementation.
 *
 * Used by generate.py to produce the frozen expected outputs under
 * expected/. Prototypes are declared by hand so the tool builds against a
 * bare libxml2 shared object without development headers; the ABI of these
 * entry points has been stable for decades.
 *
 * usage: oracle <file> <mode 0=c14n10|1=exc-c14n> <with_comments 0|1>
 *               <subtree-local-name> [prefix,prefix,...]
 */
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

typedef unsigned char xmlChar;
typedef void *xmlDocPtr;
typedef void *xmlNodeSetPtr;
typedef void *xmlXPathContextPtr;

typedef struct {
    int type;
    xmlNodeSetPtr nodesetval;
} xmlXPathObjectMin;

extern xmlDocPtr xmlReadMemory(const char *buffer, int size, const char *url,
                               const char *encoding, int options);
extern xmlXPathContextPtr xmlXPathNewContext(xmlDocPtr doc);
extern xmlXPathObjectMin *xmlXPathEvalExpression(const xmlChar *str,
                                                 xmlXPathContextPtr ctxt);
extern int xmlC14NDocDumpMemory(xmlDocPtr doc, xmlNodeSetPtr nodes, int mode,
                                xmlChar **inclusive_ns_prefixes,
                                int with_comments, xmlChar **doc_txt_ptr);

int main(int argc, char **argv) {
    if (argc < 5) {
        fprintf(stderr, "usage: oracle <file> <mode> <with_comments> <subtree> [prefixes]\n");
        return 2;
    }
    FILE *f = fopen(argv[1], "rb");
    if (!f) {
        perror("open");
        return 2;
    }
    fseek(f, 0, SEEK_END);
    long n = ftell(f);
    fseek(f, 0, SEEK_SET);
    char *buf = malloc(n);
    if (fread(buf, 1, n, f) != (size_t)n) {
        return 2;
    }
    fclose(f);

    xmlDocPtr doc = xmlReadMemory(buf, (int)n, "input.xml", NULL, 0);
    if (!doc) {
        fprintf(stderr, "parse failed\n");
        return 2;
    }

    int mode = atoi(argv[2]);
    int with_comments = atoi(argv[3]);

    /* Subtree node set: the element with the given local name plus its
     * descendants, attributes and namespace nodes. */
    xmlXPathContextPtr ctx = xmlXPathNewContext(doc);
    char expr[1024];
    snprintf(expr, sizeof expr,
             "(//. | //@* | //namespace::*)[ancestor-or-self::*[local-name()='%s']]",
             argv[4]);
    xmlXPathObjectMin *xp = xmlXPathEvalExpression((const xmlChar *)expr, ctx);
    if (!xp || !xp->nodesetval) {
        fprintf(stderr, "xpath failed\n");
        return 2;
    }

    xmlChar *pfbuf[16];
    xmlChar **prefixes = NULL;
    if (argc > 5 && argv[5][0] != '\0') {
        int k = 0;
        char *tok = strtok(argv[5], ",");
        while (tok && k < 15) {
            pfbuf[k++] = (xmlChar *)tok;
            tok = strtok(NULL, ",");
        }
        pfbuf[k] = NULL;
        prefixes = pfbuf;
    }

    xmlChar *out = NULL;
    int len = xmlC14NDocDumpMemory(doc, xp->nodesetval, mode, prefixes,
                                   with_comments, &out);
    if (len < 0) {
        fprintf(stderr, "c14n failed\n");
        return 2;
    }
    fwrite(out, 1, len, stdout);
    return 0;
}
