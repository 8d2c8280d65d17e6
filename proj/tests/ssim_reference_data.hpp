// SSIM anchor values computed with an external reference implementation
// (scikit-image structural_similarity, gaussian_weights, sigma 1.5, win 11,
// population covariance, data_range 1). Pixel values are multiples of 1/1024
// so float32 storage is exact.
#pragma once

namespace ssim_ref {

inline constexpr double kSsim16 = -0.053753865387129972;
inline constexpr double kSsim32 = -0.0045751673477932055;

inline const int kA16[256] = {
    574,128,458,588,697,406,599,342,316,641,277,670,918,423,332,318,166,780,693,586,
    905,757,375,951,788,647,363,599,219,135,505,793,653,18,769,333,963,123,893,654,
    796,340,199,461,370,134,774,288,770,938,911,930,494,931,682,110,865,786,851,829,
    855,527,429,613,781,920,948,53,783,581,676,699,914,459,340,453,495,866,1021,150,
    466,709,589,835,12,778,699,791,402,205,923,805,579,258,484,1002,637,26,933,638,
    13,686,137,839,903,913,188,891,376,439,199,236,191,146,21,216,759,229,240,508,
    383,913,165,897,540,288,210,511,344,473,46,502,737,266,150,291,647,723,886,568,
    630,394,103,805,798,399,417,445,493,732,437,919,977,334,108,127,444,626,952,394,
    385,370,868,1014,586,292,800,400,85,252,521,962,300,750,587,341,721,828,49,532,
    328,604,235,469,701,658,498,209,811,170,825,532,517,848,883,191,69,949,412,799,
    263,60,979,744,788,914,612,824,873,837,163,793,400,397,959,305,826,870,650,847,
    784,347,591,590,486,39,716,335,748,727,840,679,68,282,468,947,923,9,534,6,
    437,284,333,64,110,973,117,899,849,935,15,986,863,407,1015,460,
};

inline const int kB16[256] = {
    988,679,239,163,987,880,858,951,187,109,784,661,979,243,987,117,329,704,847,156,
    583,64,670,272,374,849,507,422,740,871,625,333,937,522,917,441,584,730,309,514,
    893,817,417,884,684,662,65,855,307,946,430,620,730,624,269,67,388,654,10,594,
    770,882,56,810,781,560,855,1023,871,676,164,112,240,431,839,61,526,371,646,698,
    347,48,991,62,419,280,173,436,855,36,102,118,127,799,830,609,822,37,443,56,
    70,418,828,873,252,337,418,1021,654,36,457,830,147,401,539,557,863,721,853,679,
    396,646,854,431,779,947,569,835,52,694,52,140,259,301,138,1021,131,941,980,913,
    808,152,84,563,106,634,552,333,310,989,192,237,712,267,691,88,179,622,145,985,
    590,460,178,39,1008,841,108,827,225,871,9,61,1004,1009,37,446,949,904,492,103,
    401,225,373,560,293,571,670,518,152,120,888,583,693,365,146,451,467,809,1019,160,
    328,910,951,174,142,330,1011,474,859,169,930,70,727,917,133,986,969,901,988,506,
    415,366,648,522,595,500,990,857,987,159,849,595,479,340,100,524,892,432,320,713,
    312,119,542,534,612,515,809,232,290,575,248,671,37,592,15,313,
};

inline const int kA32[1024] = {
    22,846,659,333,218,707,490,109,858,565,109,505,715,164,1013,61,392,314,130,127,
    698,897,587,483,248,346,90,376,510,979,108,441,749,911,875,926,360,550,549,477,
    747,973,25,253,745,178,952,132,159,248,361,622,333,238,559,672,689,892,420,740,
    926,521,578,392,33,723,512,672,476,937,650,646,122,243,951,437,892,19,563,411,
    298,519,87,277,496,465,772,798,552,108,865,683,147,314,83,303,695,955,938,837,
    639,589,988,191,619,846,251,460,175,921,955,496,437,537,237,868,960,65,181,489,
    358,910,368,21,693,654,196,189,957,118,792,971,162,952,596,471,465,431,277,948,
    279,187,895,475,384,536,966,321,658,73,627,567,725,848,153,910,644,154,446,772,
    861,590,438,362,153,748,445,542,508,944,714,709,803,416,852,707,822,110,546,511,
    440,776,669,818,564,709,196,940,193,610,651,791,570,684,256,972,476,177,56,801,
    38,821,74,358,102,389,343,1012,235,727,264,756,311,884,586,320,315,1011,374,219,
    976,447,191,980,918,577,170,853,406,1010,105,927,26,280,354,751,828,472,21,417,
    837,213,976,368,109,123,462,1020,954,713,125,882,421,786,726,829,42,538,608,56,
    28,171,61,262,425,810,390,355,836,200,496,584,922,965,470,930,428,606,431,345,
    208,583,659,3,911,405,455,716,785,161,855,653,461,232,225,181,659,998,752,814,
    862,567,1022,300,0,17,60,754,490,281,536,661,452,326,109,525,951,974,831,463,
    915,126,33,234,736,912,851,968,121,265,960,680,383,279,601,653,630,991,34,273,
    172,50,58,959,64,933,586,938,999,560,610,25,217,540,660,929,253,156,657,889,
    491,698,604,74,349,478,904,401,617,616,926,33,711,934,162,659,789,986,245,320,
    725,467,774,417,627,148,358,271,297,245,359,581,296,97,677,440,818,555,598,969,
    181,262,628,276,37,739,885,703,69,755,744,22,624,432,219,165,317,521,719,744,
    470,252,471,197,152,274,445,383,100,744,823,366,509,362,25,658,417,283,475,378,
    534,399,540,161,942,246,307,560,652,135,968,725,32,722,328,507,1004,512,609,152,
    771,209,344,636,723,416,344,231,396,41,282,554,63,363,89,546,906,832,643,81,
    716,893,287,47,877,705,530,363,78,461,820,531,243,1007,518,514,32,175,443,993,
    372,349,120,737,474,772,865,295,339,760,316,401,759,995,911,740,405,250,743,899,
    468,307,832,700,585,368,880,433,653,670,689,735,955,7,922,282,767,246,751,834,
    958,147,600,505,314,212,666,21,888,961,283,27,613,362,550,654,865,825,318,458,
    959,823,984,719,252,310,839,784,422,716,86,557,729,997,758,370,149,929,164,44,
    210,350,400,861,475,510,101,754,429,897,720,13,85,728,229,443,357,930,255,676,
    476,178,728,48,198,214,691,654,414,445,546,667,590,671,745,1017,217,614,260,859,
    616,7,140,411,47,372,74,408,935,136,442,651,741,698,876,334,332,177,682,557,
    437,887,439,445,864,280,796,576,792,153,88,215,53,354,490,664,542,368,807,170,
    693,302,974,336,358,548,213,747,73,9,813,462,681,767,102,671,24,1004,844,848,
    227,893,703,390,43,727,199,408,146,895,201,879,933,127,959,103,776,712,182,311,
    270,814,496,389,1022,126,584,465,382,80,74,502,723,717,160,442,566,49,783,495,
    1009,534,754,617,411,343,344,668,84,242,674,102,857,273,479,773,495,206,76,230,
    595,270,915,933,253,293,722,349,582,769,620,543,366,777,390,258,703,961,400,702,
    59,656,627,809,302,297,275,653,490,80,660,380,611,642,957,26,277,690,821,339,
    442,928,635,101,423,124,1020,157,64,483,970,829,491,718,527,180,552,1002,753,366,
    1008,791,669,723,108,653,27,488,894,357,726,894,809,845,56,1001,166,562,312,879,
    690,302,148,663,229,868,477,917,911,800,122,751,319,655,783,0,693,207,388,576,
    800,168,398,213,600,106,178,349,653,605,469,498,434,994,361,604,750,16,393,761,
    270,622,721,241,172,402,148,290,789,652,688,429,532,884,857,755,43,439,154,571,
    991,194,677,633,100,727,424,594,9,407,761,267,588,307,423,492,868,78,564,459,
    84,791,569,639,864,854,998,947,983,534,829,291,935,840,237,899,679,902,856,603,
    737,205,424,761,44,928,102,683,798,791,796,614,459,105,937,643,845,463,174,262,
    78,400,763,353,1020,59,346,582,1005,493,336,632,173,491,625,213,381,75,504,205,
    202,117,651,912,239,425,970,301,445,582,482,206,172,922,303,669,835,757,312,907,
    783,235,563,97,474,96,888,389,261,815,636,331,998,784,492,61,983,654,369,861,
    995,912,998,309,407,1022,629,442,184,330,857,1017,561,150,574,759,335,259,303,109,
    3,335,922,98,
};

inline const int kB32[1024] = {
    439,32,536,438,232,755,420,143,483,970,487,763,696,463,262,390,395,567,151,646,
    459,168,1022,327,800,551,345,697,850,762,83,594,657,408,853,923,799,756,190,261,
    470,4,143,240,620,634,978,284,146,810,744,664,21,450,693,413,57,517,699,157,
    985,556,324,613,701,183,591,811,946,379,797,576,847,544,740,280,651,237,47,822,
    623,851,298,866,693,950,125,995,340,563,134,705,613,536,942,410,936,44,954,693,
    611,486,106,508,253,709,464,895,577,823,1022,994,458,444,575,684,402,726,303,759,
    773,1001,518,933,218,718,468,503,755,40,478,469,707,43,105,816,134,840,121,151,
    204,243,931,744,805,180,25,370,161,467,384,580,1000,569,352,1022,659,140,985,707,
    770,673,6,187,406,645,183,44,893,53,947,345,301,853,884,857,231,175,613,966,
    39,488,93,973,553,260,433,83,1019,722,1000,471,841,313,276,379,289,413,334,600,
    450,781,426,29,910,341,202,616,611,300,947,167,892,831,792,682,85,907,802,683,
    247,591,943,707,171,803,373,693,670,168,967,828,814,305,599,748,459,700,437,931,
    108,900,189,829,531,1003,246,296,723,451,858,674,975,605,227,853,191,149,950,355,
    944,360,627,458,913,871,38,409,285,514,318,615,226,282,208,364,538,106,814,801,
    442,868,188,1018,593,994,575,21,555,521,125,667,822,992,974,562,908,436,282,787,
    255,48,255,106,915,518,674,45,347,640,217,820,544,439,827,976,209,564,1013,304,
    726,761,220,285,938,490,219,139,825,586,494,46,783,253,134,321,666,987,192,514,
    661,899,951,608,382,276,998,884,937,623,191,858,742,96,659,474,627,790,515,522,
    179,568,380,293,698,143,118,768,168,159,49,999,459,135,1017,757,396,807,689,260,
    240,257,736,268,1019,714,535,572,195,993,224,66,48,115,172,1012,147,605,389,678,
    816,827,954,772,990,202,864,546,1000,804,280,773,199,853,774,252,456,59,680,719,
    625,965,440,559,657,744,363,892,294,720,888,35,838,378,79,287,137,513,94,934,
    319,349,788,4,828,380,867,1011,452,692,650,461,160,437,39,37,880,129,755,704,
    130,37,333,675,121,505,197,97,938,480,286,93,321,345,472,626,465,966,92,46,
    1005,402,772,651,203,494,277,291,70,649,340,854,690,554,123,728,991,242,290,636,
    647,357,703,1007,15,469,832,951,83,996,965,682,651,10,147,783,285,742,761,87,
    54,60,681,180,122,957,387,392,567,981,155,317,492,161,977,355,547,657,1022,840,
    227,75,546,276,644,253,225,509,859,298,907,603,107,260,386,378,848,915,766,457,
    390,770,968,30,946,629,220,612,392,105,526,123,152,521,686,602,679,745,74,135,
    956,792,897,58,908,896,203,775,467,729,836,376,220,439,729,660,762,774,443,287,
    713,438,937,192,723,235,898,42,197,625,607,942,997,741,900,29,940,644,14,501,
    244,815,823,469,314,788,208,585,507,273,959,137,480,88,604,441,706,261,687,769,
    89,517,310,616,887,284,379,178,937,421,765,14,247,138,49,607,509,962,283,227,
    664,571,780,309,519,598,938,164,764,620,998,386,442,47,524,910,1005,678,929,904,
    127,814,806,694,860,477,326,39,819,747,31,886,173,523,665,691,531,934,130,985,
    373,888,348,737,683,999,45,803,912,185,33,457,473,897,288,949,178,928,622,882,
    8,667,204,957,656,49,870,702,146,933,509,811,943,588,245,661,107,106,173,212,
    835,675,859,445,110,1023,589,215,489,297,838,585,301,609,474,93,1010,530,747,556,
    941,654,798,243,366,770,491,600,562,854,108,1017,110,581,88,321,266,3,438,249,
    461,81,108,672,863,646,887,102,444,498,974,28,604,385,308,944,955,419,656,114,
    772,633,937,220,256,366,252,405,246,86,770,508,816,238,380,465,641,441,169,871,
    982,814,419,305,414,29,780,385,421,86,859,677,357,854,436,457,122,874,554,378,
    394,330,728,862,636,248,443,1001,609,548,797,748,132,934,257,447,497,1,683,273,
    558,621,390,785,383,803,675,6,665,0,580,42,392,491,767,361,903,79,91,184,
    599,776,527,456,136,872,297,1021,157,978,210,165,172,702,244,230,242,131,323,28,
    782,994,932,256,281,961,276,693,648,911,542,526,237,418,305,362,166,523,984,384,
    298,929,290,511,287,646,761,863,164,829,98,92,334,280,837,756,250,291,20,138,
    130,586,693,476,435,402,46,911,985,979,253,1023,711,978,610,750,305,90,762,895,
    376,306,883,782,663,534,149,580,591,30,437,31,733,893,34,739,481,698,1014,332,
    598,515,460,379,423,455,245,851,34,669,35,500,630,819,673,617,432,240,680,73,
    242,564,780,469,489,468,218,279,152,683,605,124,650,164,207,927,312,330,595,918,
    657,893,321,827,
};

}  // namespace ssim_ref
