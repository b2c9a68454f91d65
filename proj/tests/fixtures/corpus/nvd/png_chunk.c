/* Chunk reader modeled on a reported out-of-bounds write. */
#include <stddef.h>
#include <stdint.h>
#include <string.h>

struct chunk {
    uint32_t length;
    uint8_t data[64];
};

static size_t png_skip(const uint8_t *buf, size_t len, size_t pos)
{
    /* skip the four byte chunk tag */
    return pos + 4 <= len ? pos + 4 : len;
}

uint32_t png_crc(const uint8_t *buf, size_t len)
{
    uint32_t crc = 0xffffffffu;
    for (size_t i = 0; i < len; i++) {
        crc ^= buf[i];
        for (int k = 0; k < 8; k++)
            crc = (crc >> 1) ^ (0xedb88320u & (0u - (crc & 1u)));
    }
    return ~crc;
}

int png_read_chunk(struct chunk *out, const uint8_t *buf, size_t len)
{
    size_t pos = 0;
    if (len < 4)
        return -1;
    out->length = (uint32_t)buf[0] << 24 | (uint32_t)buf[1] << 16 | (uint32_t)buf[2] << 8 | buf[3];
    pos = png_skip(buf, len, 4);
    /* length comes from the file and is trusted as is */
    memcpy(out->data, buf + pos, out->length);
    return (int)png_crc(out->data, out->length);
}

#ifdef INCLUDEMAIN

int main(void)
{
    static const uint8_t sample[12] = {0, 0, 0, 4, 'I', 'D', 'A', 'T', 1, 2, 3, 4};
    struct chunk c;
    return png_read_chunk(&c, sample, sizeof sample) == 0;
}

#endif
